import numpy as np
import pytest

from vfbns.model_core import Params, normalize
from vfbns.initial_data import DataFamily, build_initial_state, equilibrium_state
from vfbns.scheme import JacobianCollapseError, rhs
from vfbns.integrate import (
    StepPolicy,
    StepSizeError,
    integrate,
    stable_dt,
    step_explicit,
    step_imex,
)
from vfbns import energetics


def setup(gamma=2.0, N=16, **kw):
    p, prof = normalize(Params(gamma=gamma, N=N, **kw))
    return p, prof


def perturbed(gamma=2.0, N=16, eps=1.0, delta=0.05):
    p, prof = normalize(Params(gamma=gamma, N=N, epsilon=eps))
    st, _ = build_initial_state(prof, p, DataFamily(kind="ill_prepared", delta=delta))
    return p, prof, st


def test_policy_validation():
    StepPolicy(mode="imex")
    with pytest.raises(ValueError):
        StepPolicy(mode="leapfrog")
    with pytest.raises(ValueError):
        StepPolicy(dt_min=1.0, dt_max=0.5)


def test_stable_dt_acoustic_formula():
    # equilibrium, gamma=2, eps=1, N=100: acoustic branch is exactly h
    p, prof = setup(N=100, dt_safety=1.0)
    st = equilibrium_state(prof, 100)
    pol = StepPolicy(mode="imex", dt_safety=1.0)
    assert stable_dt(st, prof, p, pol) == pytest.approx(0.01, rel=1e-12)

    # halving epsilon halves the acoustic branch
    p2, _ = setup(N=100, epsilon=0.5)
    assert stable_dt(st, prof, p2, pol) == pytest.approx(0.005, rel=1e-12)


def test_stable_dt_viscous_branch_explicit_only():
    p, prof = setup(N=100)
    st = equilibrium_state(prof, 100)
    imex = StepPolicy(mode="imex", dt_safety=1.0)
    expl = StepPolicy(mode="explicit_reference", dt_safety=1.0)
    h = 0.01
    viscous = prof.rho(1.0 - h) * h * h / 2.0
    assert stable_dt(st, prof, p, expl) == pytest.approx(viscous, rel=1e-12)
    assert stable_dt(st, prof, p, imex) == pytest.approx(h, rel=1e-12)


def test_stable_dt_branch_separation_small_eps():
    # at eps=0.05, N=400 the viscous bound near the vacuum node is orders of
    # magnitude below the acoustic bound the imex integrator runs at
    p, prof = setup(gamma=2.0, N=400, epsilon=0.05)
    st = equilibrium_state(prof, 400)
    pol1 = StepPolicy(mode="imex", dt_safety=1.0)
    pol2 = StepPolicy(mode="explicit_reference", dt_safety=1.0)
    dt_imex = stable_dt(st, prof, p, pol1)
    dt_expl = stable_dt(st, prof, p, pol2)
    assert dt_expl < 1e-3 * dt_imex


def test_stable_dt_floor_aborts():
    p, prof = setup(gamma=1.4, N=200)
    st = equilibrium_state(prof, 200)
    pol = StepPolicy(mode="explicit_reference", dt_min=1e-8)
    with pytest.raises(StepSizeError):
        stable_dt(st, prof, p, pol)


def test_explicit_equilibrium_fixed_point_any_dt():
    # the discrete equilibrium is a bitwise fixed point, so even a step far
    # beyond the viscous stability bound leaves it unchanged
    p, prof = setup(gamma=1.4, N=64, epsilon=0.1)
    st = equilibrium_state(prof, 64)
    out = step_explicit(st, 0.5, prof, p)
    assert np.all(out.v == 0.0)
    assert np.all(out.w == st.w)


def test_imex_equilibrium_fixed_point():
    p, prof = setup(gamma=1.4, N=64)
    st = equilibrium_state(prof, 64)
    out = step_imex(st, 0.1, prof, p)
    assert np.max(np.abs(out.v)) < 1e-16
    assert np.allclose(out.w, st.w, atol=1e-18)


def test_boundary_identities_after_steps():
    p, prof, st = perturbed(N=16)
    dt = 1e-5
    for stepper in (step_explicit, step_imex):
        s = stepper(st, dt, prof, p)
        N = s.N
        assert s.v[0] == 0.0 and s.v[1] == 0.0          # nodes -1, 0
        assert s.v[N + 1] == s.v[N]                     # v^N = v^{N-1}
        assert s.v[N + 2] == s.v[N + 1]                 # ghost
        assert s.eta[1] == 0.0                          # eta^0 pinned
        assert s.w[N - 1] == st.w[N - 1]                # frozen end increments
        assert s.w[N] == st.w[N]


def test_explicit_matches_plain_rk4():
    # the compiled kernel agrees with a straightforward RK4 built on rhs()
    p, prof, st = perturbed(N=12)
    dt = 2e-5

    def plain_rk4(s):
        def f(vv, ww):
            import vfbns.scheme as sch
            tmp = s.copy()
            tmp.v, tmp.w = vv, ww
            a = rhs(tmp, prof, p).full()
            dw = np.empty_like(ww)
            dw[:] = vv[2:] - vv[1:-1]
            return a, dw

        v0, w0 = s.v.copy(), s.w.copy()
        k1a, k1w = f(v0, w0)
        k2a, k2w = f(v0 + dt / 2 * k1a, w0 + dt / 2 * k1w)
        k3a, k3w = f(v0 + dt / 2 * k2a, w0 + dt / 2 * k2w)
        k4a, k4w = f(v0 + dt * k3a, w0 + dt * k3w)
        v1 = v0 + dt / 6 * (k1a + 2 * k2a + 2 * k3a + k4a)
        w1 = w0 + dt / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
        return v1, w1

    v_ref, w_ref = plain_rk4(st)
    out = step_explicit(st, dt, prof, p)
    assert np.allclose(out.v, v_ref, rtol=1e-12, atol=1e-16)
    assert np.allclose(out.w, w_ref, rtol=1e-12, atol=1e-18)


def test_explicit_temporal_order():
    # Richardson order against a much finer reference must be >= 3.8
    p, prof, st = perturbed(N=16)
    T = 6.4e-4
    pol = lambda dt: StepPolicy(mode="explicit_reference", dt_fixed=dt)
    sched = np.asarray([0.0, T])

    def final(dt):
        traj = integrate(st, prof, p, pol(dt), sched, keep_states=True)
        return traj.states[-1]

    ref = final(T / 3200)
    errs = []
    for split in (32, 64, 128):
        s = final(T / split)
        errs.append(np.max(np.abs(s.v - ref.v)))
    o1 = np.log2(errs[0] / errs[1])
    o2 = np.log2(errs[1] / errs[2])
    assert o1 >= 3.8 and o2 >= 3.8


def test_imex_explicit_mutual_convergence():
    p, prof, st = perturbed(N=16)
    diffs = []
    for dt in (2e-5, 1e-5):
        e = step_explicit(st, dt, prof, p)
        i = step_imex(st, dt, prof, p)
        diffs.append(np.max(np.abs(e.v - i.v)))
    assert diffs[0] / diffs[1] > 1.8  # at least first-order agreement


def test_integrate_equilibrium_trajectory():
    p, prof = setup(gamma=1.4, N=32, epsilon=0.1)
    st = equilibrium_state(prof, 32)
    for mode in ("imex", "explicit_reference"):
        pol = StepPolicy(mode=mode, dt_fixed=0.01)
        traj = integrate(st, prof, p, pol, np.linspace(0.0, 2.0, 5),
                         keep_states=True)
        for s in traj.states:
            assert np.all(s.v == 0.0)
            assert np.all(s.w == st.w)
        assert traj.max_step_dE == 0.0
        assert traj.min_etax == 1.0 and traj.max_etax == 1.0


def test_integrate_schedule_contract():
    p, prof, st = perturbed(N=16)
    sched = np.asarray([0.0, 1.0, 2.0])
    traj = integrate(st, prof, p, StepPolicy(mode="imex", dt_safety=0.5), sched,
                     keep_states=True)
    assert len(traj.states) == 3
    assert [s.t for s in traj.states] == [0.0, 1.0, 2.0]


def test_integrate_monotone_energy_explicit():
    p, prof, st = perturbed(N=16)
    pol = StepPolicy(mode="explicit_reference", dt_safety=0.1)
    traj = integrate(st, prof, p, pol, np.linspace(0.0, 0.05, 6))
    assert traj.max_step_dE <= 1e-12
    assert np.all(np.diff(traj.E_samples) <= 1e-12)
    # integrated identity at tight tolerance
    res = abs(traj.E_last + traj.diss_integral - traj.E_first)
    assert res <= 1e-8 * traj.E_first


def test_integrate_determinism():
    p, prof, st = perturbed(N=24)
    pol = StepPolicy(mode="imex", dt_safety=0.4)
    sched = np.linspace(0.0, 0.5, 7)
    t1 = integrate(st, prof, p, pol, sched, keep_states=True)
    t2 = integrate(st, prof, p, pol, sched, keep_states=True)
    for a, b in zip(t1.states, t2.states):
        assert np.array_equal(a.v, b.v)
        assert np.array_equal(a.w, b.w)


def test_unstable_explicit_aborts_with_time():
    p, prof, st = perturbed(N=32)
    # ten times the stable step: RK4 amplifies the stiff viscous modes
    pol = StepPolicy(mode="explicit_reference", dt_safety=10.0)
    with pytest.raises(JacobianCollapseError) as err:
        integrate(st, prof, p, pol, np.linspace(0.0, 1.0, 5))
    assert np.isfinite(err.value.time)


def test_record_hook_invoked_at_samples():
    p, prof, st = perturbed(N=16)
    seen = []
    traj = integrate(st, prof, p, StepPolicy(mode="imex", dt_safety=0.5),
                     np.linspace(0.0, 0.2, 5),
                     record_fn=lambda s: seen.append(s.t))
    assert seen == [0.0, 0.05, 0.1, 0.15000000000000002, 0.2]
    assert len(traj.records) == 5
