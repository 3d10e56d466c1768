import math

import numpy as np
import pytest

from vfbns.model_core import Params, normalize
from vfbns.initial_data import (
    DataFamily,
    InitialProfiles,
    SHAPES,
    build_initial_state,
    compatibility_h1,
    compatibility_h2,
    diffeomorphism_from_density,
    equilibrium_data,
    equilibrium_state,
    perturbed_data,
    state_from_map_nodes,
)
from vfbns.scheme import free_boundary, rhs
from vfbns import energetics

# h1 for uniform compression etax = c, gamma=2, eps=1:  c^-2 - 1 = 19/81
H1_COMPRESSION = 19.0 / 81.0


def setup(gamma=2.0, N=16, **kw):
    p, prof = normalize(Params(gamma=gamma, N=N, **kw))
    return p, prof


def test_equilibrium_nodes_and_rhs():
    p, prof = setup(N=4)
    st = equilibrium_state(prof, 4)
    assert np.allclose(st.eta[1:6], [0.0, 0.25, 0.5, 0.75, 1.0], atol=0)
    assert np.all(rhs(st, prof, p).accel == 0.0)
    assert energetics.low_energy_EL(st, prof, p) == 2.0
    assert energetics.well_prepared_energy(st, prof, p) == 0.0


def test_shapes_satisfy_boundary_compatibility():
    phi, phi_int, phi_d, psi, psi_d = SHAPES["cos_bump"]
    assert psi(0.0) == 0.0
    assert psi_d(1.0) == 0.0
    assert phi(1.0) == 0.0 and phi_d(1.0) == 0.0
    # antiderivative consistency
    for x in (0.13, 0.5, 0.92, 1.0):
        dh = 1e-6
        num = (phi_int(x + dh) - phi_int(x - dh)) / (2 * dh)
        assert num == pytest.approx(phi(x), abs=1e-9)
    assert phi_int(0.0) == 0.0
    # amplitude normalization: both shapes peak at 1 in magnitude
    xs = np.linspace(0, 1, 2001)
    assert max(abs(phi(x)) for x in xs) == pytest.approx(1.0, abs=1e-12)
    assert max(abs(psi(x)) for x in xs) == pytest.approx(1.0, rel=1e-6)


def test_perturbed_zero_delta_is_equilibrium():
    p, prof = setup()
    st, D0 = build_initial_state(prof, p, DataFamily(kind="ill_prepared", delta=0.0))
    assert D0 == 1.0
    assert np.all(st.w == st.h)


def test_ill_prepared_amplitude_and_D0():
    p, prof = setup(N=64)
    data = perturbed_data(prof, 64, DataFamily(kind="ill_prepared", delta=0.1), 1.0)
    assert data.v(0.0) == 0.0
    # D0 bounded by 1/(1 - delta) since |phi| <= 1
    assert data.D0 <= 1.0 / 0.9 + 1e-12
    st, D0 = build_initial_state(prof, p, DataFamily(kind="ill_prepared", delta=0.1))
    etax = st.interior_etax()
    assert np.all(etax >= 1.0 / D0 - 1e-12)
    assert np.all(etax <= D0 + 1e-12)


def test_ill_prepared_scales_with_epsilon():
    _, prof = setup(N=32)
    d1 = perturbed_data(prof, 32, DataFamily(kind="ill_prepared", delta=0.1), 1.0)
    d2 = perturbed_data(prof, 32, DataFamily(kind="ill_prepared", delta=0.1), 0.5)
    x = 0.37
    assert d2.etax(x) - 1.0 == pytest.approx(0.5 * (d1.etax(x) - 1.0), rel=1e-13)
    assert d2.v(x) == pytest.approx(0.5 * d1.v(x), rel=1e-13)


def test_well_prepared_amplitude():
    _, prof = setup(N=32)
    data = perturbed_data(prof, 32, DataFamily(kind="well_prepared", delta=0.1), 0.1)
    xs = np.linspace(0, 1, 501)
    assert max(abs(data.etax(x) - 1.0) for x in xs) <= 1e-3 + 1e-15


def test_amplitude_too_large_rejected():
    # the bump's negative lobe is shallow, so a sign flip trips the check
    _, prof = setup()
    with pytest.raises(ValueError):
        perturbed_data(prof, 16, DataFamily(kind="ill_prepared", delta=-1.5), 1.0)
    with pytest.raises(ValueError):
        perturbed_data(prof, 16, DataFamily(kind="ill_prepared", delta=20.0), 1.0)


def test_well_prepared_energy_bounded_in_epsilon():
    # rescaled low-order energy of the family stays bounded as eps decreases
    # (it is largest at the largest eps: the viscous part of the initial
    # acceleration carries the extra eps^2)
    vals = []
    for eps in (0.4, 0.2, 0.1, 0.05):
        p, prof = normalize(Params(gamma=1.4, epsilon=eps, N=200))
        st, _ = build_initial_state(prof, p, DataFamily(kind="well_prepared", delta=0.1))
        vals.append(energetics.well_prepared_energy(st, prof, p))
    assert max(vals) == vals[0]
    assert all(v > 0.0 for v in vals)


def test_diffeomorphism_identity_on_background():
    p, prof = setup(gamma=1.4, N=16)
    eta = diffeomorphism_from_density(prof.rho, 1.0, prof, 16)
    assert np.allclose(eta, np.arange(17) / 16, atol=1e-9)


@pytest.mark.parametrize("gamma", [1.4, 2.0])
def test_diffeomorphism_forward_construction_roundtrip(gamma):
    # pick a smooth flow map, define rho0 by pushing the background through
    # it, and require the inversion to recover the map at every node
    p, prof = setup(gamma=gamma, N=16)

    def eta_star(x):
        return (3.0 * x + x * x) / 4.0

    def eta_star_prime(x):
        return (3.0 + 2.0 * x) / 4.0

    def x_of_s(s):
        return (-3.0 + math.sqrt(9.0 + 16.0 * s)) / 2.0

    def rho0(s):
        x = min(max(x_of_s(s), 0.0), 1.0)
        return prof.rho(x) / eta_star_prime(x)

    eta = diffeomorphism_from_density(rho0, 1.0, prof, 16)
    expect = eta_star(np.arange(17) / 16.0)
    assert np.max(np.abs(eta - expect)) < 1e-8
    assert eta[8] == pytest.approx(0.4375, abs=1e-8)

    st = state_from_map_nodes(eta)
    assert free_boundary(st) == pytest.approx(1.0, abs=1e-12)


def test_diffeomorphism_roundtrip_second_map():
    # a stiffer test Jacobian, inverse evaluated by root finding
    from scipy.optimize import brentq

    p, prof = setup(gamma=1.4, N=16)

    def eta_star(x):
        return 0.5 * (x + x**3)

    def eta_star_prime(x):
        return 0.5 * (1.0 + 3.0 * x * x)

    def rho0(s):
        x = brentq(lambda t: eta_star(t) - s, 0.0, 1.0, xtol=1e-14)
        return prof.rho(x) / eta_star_prime(x)

    eta = diffeomorphism_from_density(rho0, 1.0, prof, 16)
    expect = eta_star(np.arange(17) / 16.0)
    assert np.max(np.abs(eta - expect)) < 1e-8


def test_diffeomorphism_mass_mismatch_rejected():
    p, prof = setup(gamma=1.4, N=8)
    with pytest.raises(ValueError):
        diffeomorphism_from_density(lambda s: 2.0 * prof.rho(s), 1.0, prof, 8)


def test_compatibility_equilibrium_exactly_zero():
    for gamma in (1.4, 2.0):
        p, prof = setup(gamma=gamma, N=32)
        data = equilibrium_data(prof, 32)
        rep = compatibility_h2(data, prof, p)
        assert np.max(np.abs(rep.h1)) <= 1e-12
        assert np.max(np.abs(rep.h2)) <= 1e-12
        assert rep.residual_h1_at_0 <= 1e-12
        assert rep.residual_h1x_at_1 <= 1e-12
        assert rep.h1_ok and rep.v0_ok and rep.v0x_ok and rep.h1x_ok


def test_compatibility_uniform_compression_oracle():
    p, prof = setup(N=32)
    data = InitialProfiles(eta=lambda x: 0.9 * x, v=lambda x: 0.0,
                           etax=lambda x: 0.9, etaxx=lambda x: 0.0,
                           vx=lambda x: 0.0)
    rep = compatibility_h1(data, prof, p)
    assert np.allclose(rep.h1, H1_COMPRESSION, atol=1e-6)
    assert rep.residual_h1_at_0 == pytest.approx(H1_COMPRESSION, abs=1e-9)
    assert not rep.h1_ok  # ill-preparedness flagged

    p01, _ = setup(N=32, epsilon=0.1)
    rep01 = compatibility_h1(data, prof, p01)
    assert np.allclose(rep01.h1, 100.0 * H1_COMPRESSION, rtol=1e-9)


def test_compatibility_h2_zero_velocity_reduces_to_h1_term():
    # with v0 = 0 the second derivative comes purely from the h1 gradient
    p, prof = setup(N=64)
    data = InitialProfiles(eta=lambda x: 0.9 * x, v=lambda x: 0.0,
                           etax=lambda x: 0.9, etaxx=lambda x: 0.0,
                           vx=lambda x: 0.0)
    rep = compatibility_h2(data, prof, p)
    # h1 is constant here, so h2 must vanish (within differencing noise)
    assert np.max(np.abs(rep.h2)) < 1e-8


def test_compatibility_flags_bad_velocity():
    p, prof = setup(N=16)
    data = InitialProfiles(eta=lambda x: x, v=lambda x: x * x,
                           etax=lambda x: 1.0, etaxx=lambda x: 0.0,
                           vx=lambda x: 2.0 * x)
    rep = compatibility_h1(data, prof, p)
    assert rep.residual_v0x_at_1 == pytest.approx(2.0, abs=1e-12)
    assert not rep.v0x_ok
    assert rep.v0_ok


@pytest.mark.parametrize("kind,eps", [("ill_prepared", 1.0), ("ill_prepared", 0.2),
                                      ("well_prepared", 0.2)])
def test_family_invariants(kind, eps):
    p, prof = normalize(Params(gamma=1.4, epsilon=eps, N=48))
    data = perturbed_data(prof, 48, DataFamily(kind=kind, delta=0.1), eps)
    assert data.eta(0.0) == 0.0
    assert data.v(0.0) == 0.0
    st, D0 = build_initial_state(prof, p, DataFamily(kind=kind, delta=0.1))
    etax = st.interior_etax()
    assert np.all((etax >= 1.0 / D0 - 1e-12) & (etax <= D0 + 1e-12))


def test_from_density_needs_api():
    p, prof = setup()
    with pytest.raises(ValueError):
        build_initial_state(prof, p, DataFamily(kind="from_density"))


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        DataFamily(kind="nonsense")
    with pytest.raises(ValueError):
        DataFamily(shape="nonsense")
