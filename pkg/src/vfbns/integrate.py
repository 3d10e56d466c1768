"""Time integration of the semi-discrete system.

Two integrators:

explicit_reference
    Classical 4th-order Runge-Kutta on the coupled (width, velocity) system.
    Used to validate the semi-discrete energy identity to tight tolerance;
    subject to the acoustic CFL *and* the viscous stability bound, which near
    the vacuum node scales like rho_{N-1} * h^2 and is brutally restrictive.
    The hot loop is compiled with numba.

imex
    First-order step: the velocity update treats the degenerate viscous term
    implicitly (tridiagonal solve, Jacobian coefficients frozen at step
    start) with the pressure bracket explicit, then the widths advance with
    the just-updated velocities.  That ordering is the symplectic-Euler
    coupling of the acoustic pair, stable at the acoustic CFL; advancing
    widths with the stale velocities would be forward Euler on an oscillator
    and weakly unstable at any step size.

Boundary identities (zero bottom velocity, mirrored vacuum-end velocity,
frozen end increments) hold exactly after every stage by construction: the
integrators evolve interior velocities and cell widths only, and widths move
by velocity differences, so the frozen increments never change.

Step control: stable_dt() takes the minimum of an acoustic branch
eps*h*min(etax)^((gamma+1)/2)/sqrt(gamma*max rho^(gamma-1)) and (explicit
mode only) a viscous branch min_i rho_i*w_i*h/2, capped by dt_max and scaled
by dt_safety.  Steps are clipped so the trajectory lands exactly on every
schedule time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import solve_banded

from . import energetics
from .model_core import Params, SteadyProfile
from .scheme import (JacobianCollapseError, LagrangianState, WIDTH_FLOOR,
                     _node_rho, _node_rho_gamma)

__all__ = [
    "StepPolicy",
    "Trajectory",
    "StepSizeError",
    "stable_dt",
    "step_explicit",
    "step_imex",
    "integrate",
]


class StepSizeError(RuntimeError):
    """The stability-limited step fell below the configured abort floor."""


@dataclass(frozen=True)
class StepPolicy:
    mode: str = "imex"  # or "explicit_reference"
    dt_safety: float = 0.9
    dt_max: float = 1.0
    dt_min: float = 1e-14
    dt_fixed: float | None = None  # bypass stable_dt with a fixed step

    def __post_init__(self):
        if self.mode not in ("imex", "explicit_reference"):
            raise ValueError(f"unknown integrator mode {self.mode!r}")
        if not 0.0 < self.dt_min < self.dt_max:
            raise ValueError("need 0 < dt_min < dt_max")
        if not self.dt_safety > 0.0:
            raise ValueError("dt_safety must be positive")


@dataclass
class Trajectory:
    """Sampled trajectory plus whole-run aggregates."""

    times: np.ndarray
    records: list
    states: list | None
    steps: int = 0
    diss_integral: float = 0.0   # time quadrature of the dissipation
    max_step_dE: float = 0.0     # largest single-step energy increase
    min_etax: float = math.inf   # over all accepted steps
    max_etax: float = -math.inf
    E_first: float = 0.0
    E_last: float = 0.0
    E_samples: np.ndarray | None = None
    aborted: bool = False
    abort_time: float = float("nan")
    abort_reason: str = ""


def stable_dt(state: LagrangianState, profile: SteadyProfile, params: Params,
              policy: StepPolicy) -> float:
    """Stability-limited step for the current state."""
    N, h = state.N, state.h
    etax_min = float(np.min(state.interior_etax()))
    if etax_min <= 0.0:
        raise JacobianCollapseError("nonpositive Jacobian in step control", state.t)
    xs = np.arange(N + 1) / N
    rho_pow_max = float(np.max(profile.rho_pow(xs, profile.gamma - 1.0)))
    acoustic = (params.epsilon * h * etax_min ** (0.5 * (profile.gamma + 1.0))
                / math.sqrt(profile.gamma * rho_pow_max))
    dt = min(acoustic, policy.dt_max)
    if policy.mode == "explicit_reference":
        rho_nodes = profile.rho(xs[1:N])  # nodes 1..N-1
        viscous = float(np.min(rho_nodes * state.w[:N - 1])) * h / 2.0
        dt = min(dt, viscous)
    dt *= policy.dt_safety
    if dt < policy.dt_min:
        raise StepSizeError(
            f"stable step {dt:.3e} below dt_min {policy.dt_min:.3e} at t={state.t}: "
            "the viscous term near the vacuum node is too stiff for the "
            "explicit integrator at this resolution"
        )
    return dt


# ---------------------------------------------------------------------------
# explicit reference integrator (numba kernel)
#
# Kernel state layout: v has N+1 entries for nodes 0..N with v[0] == 0 and
# v[N] == v[N-1]; w has N entries for cells 1..N.  The ghost entries of the
# public state are reconstructed on exit.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _accels(v, w, rho, rho_g, h, eps2, gamma, out):
    """Accelerations at nodes 1..N-1 into out[1:N]; out[0] = 0, out[N] = out[N-1]."""
    N = w.shape[0]
    out[0] = 0.0
    if gamma == 2.0:
        for i in range(1, N):
            yu = h / w[i]
            yd = h / w[i - 1]
            bu = rho_g[i + 1] * (yu * yu - 1.0)
            bd = rho_g[i] * (yd * yd - 1.0)
            visc = ((v[i + 1] - v[i]) / w[i] - (v[i] - v[i - 1]) / w[i - 1]) / h
            out[i] = (visc - (bu - bd) / (h * eps2)) / rho[i]
    else:
        for i in range(1, N):
            bu = rho_g[i + 1] * ((h / w[i]) ** gamma - 1.0)
            bd = rho_g[i] * ((h / w[i - 1]) ** gamma - 1.0)
            visc = ((v[i + 1] - v[i]) / w[i] - (v[i] - v[i - 1]) / w[i - 1]) / h
            out[i] = (visc - (bu - bd) / (h * eps2)) / rho[i]
    out[N] = out[N - 1]


@njit(cache=True)
def _energy_diss(v, w, rho, rho_g, h, eps2, gamma):
    """(energy, dissipation) of the kernel state."""
    N = w.shape[0]
    E = 0.0
    D = 0.0
    for i in range(1, N):
        y = w[i - 1] / h
        gy = (y ** (1.0 - gamma) - 1.0) / (gamma - 1.0) + (y - 1.0)
        E += h * (0.5 * rho[i] * v[i] * v[i] + rho_g[i] * gy / eps2)
        dv = v[i] - v[i - 1]
        D += dv * dv / w[i - 1]
    return E, D


@njit(cache=True)
def _rk4_span(v, w, rho, rho_g, h, eps2, gamma, dt, n_steps, width_floor):
    """Advance n_steps RK4 steps in place.

    Returns (status, steps_done, diss_integral, max_dE, min_w, max_w) where
    status 0 = ok, 1 = Jacobian collapse / non-finite state.
    Dissipation is integrated with the Runge-Kutta weights (1,2,2,1)/6.
    """
    N = w.shape[0]
    a1 = np.empty(N + 1)
    a2 = np.empty(N + 1)
    a3 = np.empty(N + 1)
    a4 = np.empty(N + 1)
    v2 = np.empty(N + 1)
    v3 = np.empty(N + 1)
    v4 = np.empty(N + 1)
    ws = np.empty(N)
    diss = 0.0
    max_dE = -1.0e300
    min_w = 1.0e300
    max_w = -1.0e300
    for j in range(N):
        if w[j] < min_w:
            min_w = w[j]
        if w[j] > max_w:
            max_w = w[j]
    E_old, D0 = _energy_diss(v, w, rho, rho_g, h, eps2, gamma)

    for step in range(n_steps):
        # stage 1 at (v, w)
        _accels(v, w, rho, rho_g, h, eps2, gamma, a1)
        Dacc = D0

        # stage 2 at (v + dt/2 a1, w + dt/2 dv(v))
        for i in range(N + 1):
            v2[i] = v[i] + 0.5 * dt * a1[i]
        for j in range(N):
            ws[j] = w[j] + 0.5 * dt * (v[j + 1] - v[j])
        _accels(v2, ws, rho, rho_g, h, eps2, gamma, a2)
        _, D = _energy_diss(v2, ws, rho, rho_g, h, eps2, gamma)
        Dacc += 2.0 * D

        # stage 3 at (v + dt/2 a2, w + dt/2 dv(stage2 v))
        for i in range(N + 1):
            v3[i] = v[i] + 0.5 * dt * a2[i]
        for j in range(N):
            ws[j] = w[j] + 0.5 * dt * (v2[j + 1] - v2[j])
        _accels(v3, ws, rho, rho_g, h, eps2, gamma, a3)
        _, D = _energy_diss(v3, ws, rho, rho_g, h, eps2, gamma)
        Dacc += 2.0 * D

        # stage 4 at (v + dt a3, w + dt dv(stage3 v))
        for i in range(N + 1):
            v4[i] = v[i] + dt * a3[i]
        for j in range(N):
            ws[j] = w[j] + dt * (v3[j + 1] - v3[j])
        _accels(v4, ws, rho, rho_g, h, eps2, gamma, a4)
        _, D = _energy_diss(v4, ws, rho, rho_g, h, eps2, gamma)
        Dacc += D

        # combine
        for j in range(N):
            w[j] += dt / 6.0 * ((v[j + 1] - v[j]) + 2.0 * (v2[j + 1] - v2[j])
                                + 2.0 * (v3[j + 1] - v3[j]) + (v4[j + 1] - v4[j]))
        for i in range(N + 1):
            v[i] += dt / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i])
        v[0] = 0.0
        v[N] = v[N - 1]

        ok = True
        for j in range(N):
            if not (w[j] > width_floor) or not np.isfinite(w[j]):
                ok = False
            if w[j] < min_w:
                min_w = w[j]
            if w[j] > max_w:
                max_w = w[j]
        E_new, D0 = _energy_diss(v, w, rho, rho_g, h, eps2, gamma)
        if not (np.isfinite(E_new) and ok):
            return 1, step + 1, diss, max_dE, min_w, max_w
        diss += dt / 6.0 * Dacc
        if E_new - E_old > max_dE:
            max_dE = E_new - E_old
        E_old = E_new
    return 0, n_steps, diss, max_dE, min_w, max_w


def _kernel_arrays(state: LagrangianState, profile: SteadyProfile):
    N = state.N
    v = state.v[1:N + 2].copy()   # nodes 0..N
    w = state.w[:N].copy()        # cells 1..N
    rho = _node_rho(profile, N)
    rho_g = _node_rho_gamma(profile, N)
    return v, w, rho, rho_g


def _rebuild(state: LagrangianState, v: np.ndarray, w: np.ndarray,
             t: float) -> LagrangianState:
    N = state.N
    nv = np.empty(N + 3)
    nv[0] = 0.0
    nv[1:N + 2] = v
    nv[N + 2] = nv[N + 1]
    nw = np.empty(N + 1)
    nw[:N] = w
    nw[N] = state.w[N]  # frozen ghost increment
    return LagrangianState(t=t, v=nv, w=nw, h=state.h)


def step_explicit(state: LagrangianState, dt: float, profile: SteadyProfile,
                  params: Params) -> LagrangianState:
    """One classical RK4 step; boundary identities re-imposed every stage."""
    v, w, rho, rho_g = _kernel_arrays(state, profile)
    status, done, _, _, _, _ = _rk4_span(
        v, w, rho, rho_g, state.h, params.epsilon**2, profile.gamma,
        dt, 1, WIDTH_FLOOR)
    if status != 0:
        raise JacobianCollapseError("Jacobian collapse during explicit step",
                                    state.t + dt)
    return _rebuild(state, v, w, state.t + dt)


def _imex_matrix(w: np.ndarray, rho: np.ndarray, h: float, dt: float):
    """Banded (1,1) matrix of the implicit-viscous velocity update."""
    N = w.shape[0]
    m = N - 1  # unknowns: nodes 1..N-1
    ab = np.zeros((3, m))
    c = dt / h
    inv_w = 1.0 / w
    diag = rho[1:N] + c * inv_w[:N - 1]
    diag[:m - 1] += c * inv_w[1:N - 1]  # upper-flux part, absent at node N-1
    ab[1, :] = diag
    ab[0, 1:] = -c * inv_w[1:N - 1]   # super-diagonal
    ab[2, :-1] = -c * inv_w[1:N - 1]  # sub-diagonal
    return ab


def step_imex(state: LagrangianState, dt: float, profile: SteadyProfile,
              params: Params) -> LagrangianState:
    """Implicit-viscous / explicit-pressure step, then width advance."""
    N, h = state.N, state.h
    v, w, rho, rho_g = _kernel_arrays(state, profile)
    if np.min(w) <= WIDTH_FLOOR:
        raise JacobianCollapseError("Jacobian collapse before implicit step", state.t)

    y = h / w
    B = rho_g[1:] * (y ** profile.gamma - 1.0)      # cells 1..N
    pres = (B[1:] - B[:-1]) / h                     # nodes 1..N-1
    rhs_vec = rho[1:N] * v[1:N] - dt * pres / params.epsilon**2
    ab = _imex_matrix(w, rho, h, dt)
    v_new = np.zeros(N + 1)
    v_new[1:N] = solve_banded((1, 1), ab, rhs_vec)
    v_new[N] = v_new[N - 1]

    w_new = w + dt * (v_new[1:] - v_new[:-1])
    if np.min(w_new) <= WIDTH_FLOOR or not np.all(np.isfinite(w_new)):
        raise JacobianCollapseError("Jacobian collapse during implicit step",
                                    state.t + dt)
    return _rebuild(state, v_new, w_new, state.t + dt)


def integrate(state0: LagrangianState, profile: SteadyProfile, params: Params,
              policy: StepPolicy, schedule, record_fn=None,
              hooks=(), keep_states: bool = False) -> Trajectory:
    """Advance to the end of the schedule, sampling at every schedule time.

    schedule: increasing times starting at state0.t.  record_fn(state) is
    evaluated at each sample (as are any extra hooks); identical inputs
    produce identical trajectories.  Step failures raise with the failing
    time attached unless caught by the caller.
    """
    schedule = np.asarray(schedule, dtype=float)
    if schedule.ndim != 1 or schedule.size < 1:
        raise ValueError("schedule must be a nonempty 1-D time array")
    if abs(schedule[0] - state0.t) > 1e-12:
        raise ValueError("schedule must start at the initial time")
    if np.any(np.diff(schedule) <= 0.0):
        raise ValueError("schedule times must be strictly increasing")

    state = state0.copy()
    state.validate()
    explicit = policy.mode == "explicit_reference"
    eps2 = params.epsilon**2

    traj = Trajectory(times=schedule.copy(), records=[], states=[] if keep_states else None)
    etax0 = state.interior_etax()
    traj.min_etax = float(np.min(etax0))
    traj.max_etax = float(np.max(etax0))
    traj.E_first = energetics.basic_energy(state, profile, params)
    E_samples = [traj.E_first]

    def sample(s):
        if record_fn is not None:
            traj.records.append(record_fn(s))
        for hk in hooks:
            hk(s)
        if keep_states:
            traj.states.append(s.copy())

    sample(state)

    for t_next in schedule[1:]:
        span = t_next - state.t
        dt_target = policy.dt_fixed if policy.dt_fixed is not None else \
            stable_dt(state, profile, params, policy)
        n_steps = max(1, int(math.ceil(span / dt_target - 1e-9)))
        dt = span / n_steps

        if explicit:
            v, w, rho, rho_g = _kernel_arrays(state, profile)
            status, done, diss, max_dE, min_w, max_w = _rk4_span(
                v, w, rho, rho_g, state.h, eps2, profile.gamma, dt, n_steps,
                WIDTH_FLOOR)
            traj.steps += done
            traj.diss_integral += diss
            traj.max_step_dE = max(traj.max_step_dE, max_dE)
            traj.min_etax = min(traj.min_etax, min_w / state.h)
            traj.max_etax = max(traj.max_etax, max_w / state.h)
            if status != 0:
                traj.aborted = True
                traj.abort_time = state.t + done * dt
                traj.abort_reason = "jacobian_collapse"
                traj.E_samples = np.asarray(E_samples)
                raise JacobianCollapseError(
                    "Jacobian collapse in explicit trajectory", traj.abort_time)
            state = _rebuild(state, v, w, t_next)
        else:
            E_prev = energetics.basic_energy(state, profile, params)
            D_prev = energetics.dissipation(state)
            for _ in range(n_steps):
                try:
                    state = step_imex(state, dt, profile, params)
                except JacobianCollapseError as err:
                    traj.aborted = True
                    traj.abort_time = err.time
                    traj.abort_reason = "jacobian_collapse"
                    traj.E_samples = np.asarray(E_samples)
                    raise
                traj.steps += 1
                E_now = energetics.basic_energy(state, profile, params)
                D_now = energetics.dissipation(state)
                traj.diss_integral += 0.5 * dt * (D_prev + D_now)
                traj.max_step_dE = max(traj.max_step_dE, E_now - E_prev)
                E_prev, D_prev = E_now, D_now
                etax = state.interior_etax()
                traj.min_etax = min(traj.min_etax, float(np.min(etax)))
                traj.max_etax = max(traj.max_etax, float(np.max(etax)))
            state.t = t_next  # land exactly (dt arithmetic is exact by construction)

        E_samples.append(energetics.basic_energy(state, profile, params))
        sample(state)

    traj.E_last = E_samples[-1]
    traj.E_samples = np.asarray(E_samples)
    return traj
