"""Energy functionals, dissipation, weighted norms and decay diagnostics.

All weighted integrals over the mass coordinate use midpoint quadrature at
cell centers, where the background density is evaluated exactly; degenerate
weights rho^(1-gamma+alpha) (singular toward the vacuum end) are therefore
only ever evaluated at strictly interior points.  Node-based quantities
(second differences) are summed with weight h over the nodes where their
stencil is well defined; third differences use the frozen ghost increment at
the vacuum end and are summed over i = 2..N (the stencil touching the bottom
ghost is degenerate there and excluded).

Time derivatives of velocity are reconstructed from the semi-discrete
equations, not by differencing trajectories: the acceleration comes from the
momentum balance itself, and its time derivative from differentiating the
flux terms in time (widths move with velocity differences).

The convex Taylor bracket of the pressure potential,

    G(y) = (y^(1-gamma) - 1)/(gamma - 1) + (y - 1),

is written so that G(1.0) evaluates to exactly 0.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model_core import Params, SteadyProfile
from .scheme import LagrangianState, rhs

__all__ = [
    "DerivativeStencils",
    "DiagnosticsRecord",
    "CSV_COLUMNS",
    "taylor_bracket",
    "basic_energy",
    "dissipation",
    "compute_stencils",
    "discrete_energy_EN",
    "low_energy_EL",
    "low_energy_groups",
    "high_energy_EH",
    "well_prepared_energy",
    "qbar_bound",
    "hardy_ratio",
    "decay_monitor",
    "diagnostics_record",
]


def taylor_bracket(y, gamma: float):
    """G(y) >= 0 with equality iff y == 1; quadratic in (y-1) near 1."""
    y = np.asarray(y, dtype=float)
    out = (y ** (1.0 - gamma) - 1.0) / (gamma - 1.0) + (y - 1.0)
    return out if out.ndim else float(out)


def _cells(state: LagrangianState):
    """Cell centers, Jacobians and velocity values/slopes on cells 1..N."""
    N = state.N
    xc = (np.arange(1, N + 1) - 0.5) * state.h
    etax = state.w[:N] / state.h
    dv = state.v[2:N + 2] - state.v[1:N + 1]
    vc = 0.5 * (state.v[2:N + 2] + state.v[1:N + 1])
    vx = dv / state.h
    return xc, etax, dv, vc, vx


def basic_energy(state: LagrangianState, profile: SteadyProfile,
                 params: Params) -> float:
    """Kinetic plus background-relative pressure potential.

    Nonnegative; zero exactly at the discrete equilibrium.  Along exact
    trajectories of the semi-discretization its time derivative is minus
    the dissipation().
    """
    N = state.N
    xs = np.arange(1, N) / N
    rho = profile.rho(xs)
    rho_g = profile.rho_gamma(xs)
    v = state.v[2:N + 1]  # nodes 1..N-1
    y = state.w[:N - 1] / state.h  # cells 1..N-1
    E = state.h * np.sum(0.5 * rho * v**2
                         + rho_g / params.epsilon**2 * taylor_bracket(y, profile.gamma))
    return float(E)


def dissipation(state: LagrangianState) -> float:
    """Sum of squared velocity jumps over cell widths; the decay rate of
    basic_energy along the semi-discrete flow."""
    N = state.N
    dv = state.v[2:N + 1] - state.v[1:N]  # cells 1..N-1
    return float(np.sum(dv**2 / state.w[:N - 1]))


def energy_rate(state: LagrangianState, profile: SteadyProfile,
                params: Params) -> float:
    """d/dt of basic_energy along the semi-discrete flow, by the chain rule.

    Uses the accelerations of the scheme and w' = velocity difference per
    cell; equals -dissipation(state) identically (summation by parts with
    the boundary conditions), which is the content of the semi-discrete
    energy identity and is what tests verify.
    """
    N, h = state.N, state.h
    xs = np.arange(1, N) / N
    rho = profile.rho(xs)
    rho_g = profile.rho_gamma(xs)
    v = state.v[2:N + 1]
    a = rhs(state, profile, params).accel
    y = state.w[:N - 1] / h
    dGdy = 1.0 - y ** (-profile.gamma)
    dv = state.v[2:N + 1] - state.v[1:N]  # w' per cell 1..N-1
    return float(h * np.sum(rho * v * a
                            + rho_g / params.epsilon**2 * dGdy * dv / h))


@dataclass
class DerivativeStencils:
    """Reconstructed derivatives on the grid.

    accel/accel_t: nodes -1..N+1 (time derivatives of v from the scheme).
    d2eta/d2v: second differences at nodes 1..N (vacuum node via the frozen
        ghost increment).
    d3eta/d3v: third differences at i = 2..N, associated with the cell
        centers x_{i-1/2}.
    """

    accel: np.ndarray
    accel_t: np.ndarray
    d2eta: np.ndarray
    d2v: np.ndarray
    d3eta: np.ndarray
    d3v: np.ndarray


def compute_stencils(state: LagrangianState, profile: SteadyProfile,
                     params: Params) -> DerivativeStencils:
    N, h = state.N, state.h
    v, w = state.v, state.w
    eps2 = params.epsilon**2
    gamma = profile.gamma

    accel = rhs(state, profile, params).full()

    # time derivative of the acceleration: differentiate the flux terms,
    # using w' = dv per cell and the boundary accelerations
    xs = np.arange(N + 1) / N
    rho_nodes = profile.rho(xs)
    rho_nodes[N] = 0.0
    rho_g_nodes = profile.rho_gamma(xs)
    rho_g_nodes[N] = 0.0

    dv = v[2:N + 3] - v[1:N + 2]          # cells 1..N+1
    da = accel[2:N + 3] - accel[1:N + 2]  # cells 1..N+1
    grad_v = dv[:N] / w[:N]               # cells 1..N
    grad_a = da[:N] / w[:N]
    visc_dot = grad_a - grad_v**2         # d/dt of (dv/w) per cell
    pres_dot = -gamma * rho_g_nodes[1:] * (h / w[:N])**gamma * grad_v  # dB_j/dt

    accel_t = np.zeros(N + 3)
    accel_t[2:N + 1] = ((visc_dot[1:] - visc_dot[:-1]) / h
                        - (pres_dot[1:] - pres_dot[:-1]) / (eps2 * h)) / rho_nodes[1:N]
    accel_t[N + 1] = accel_t[N]
    accel_t[N + 2] = accel_t[N + 1]

    d2eta = (w[1:] - w[:-1]) / h**2                   # nodes 1..N
    d2v = (v[3:] - 2.0 * v[2:-1] + v[1:-2]) / h**2    # nodes 1..N
    d3eta = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / h**3   # i = 2..N
    d3v = (v[4:] - 3.0 * v[3:-1] + 3.0 * v[2:-2] - v[1:-3]) / h**3  # i = 2..N
    return DerivativeStencils(accel=accel, accel_t=accel_t, d2eta=d2eta,
                              d2v=d2v, d3eta=d3eta, d3v=d3v)


def discrete_energy_EN(state: LagrangianState, profile: SteadyProfile,
                       params: Params,
                       stencils: DerivativeStencils | None = None) -> float:
    """Sup-type plus summed functional controlling the semi-discrete flow.

    Equals 2 at the discrete equilibrium (the two Jacobian sup terms)."""
    if stencils is None:
        stencils = compute_stencils(state, profile, params)
    N, h = state.N, state.h
    etax = state.w[:N] / h
    dvh = (state.v[2:N + 2] - state.v[1:N + 1]) / h
    sup_term = float(np.max(etax**2 + etax**-2 + dvh**2))

    xs = np.arange(1, N) / N
    rho = profile.rho(xs)
    v = state.v[2:N + 1]
    a = stencils.accel[2:N + 1]
    at = stencils.accel_t[2:N + 1]
    weighted = h * np.sum(rho * (v**2 + a**2 + at**2))
    second = h * (np.sum(stencils.d2v[:N - 1]**2) + np.sum(stencils.d2eta[:N - 1]**2))
    third = h * (np.sum(stencils.d3v**2) + np.sum(stencils.d3eta**2))
    return sup_term + weighted + second + third


def low_energy_groups(state: LagrangianState, profile: SteadyProfile,
                      params: Params, t: float | None = None,
                      stencils: DerivativeStencils | None = None) -> dict:
    """The individual groups of the low-order weighted energy."""
    if stencils is None:
        stencils = compute_stencils(state, profile, params)
    if t is None:
        t = state.t
    N, h = state.N, state.h
    gamma, alpha = profile.gamma, params.alpha
    eps = params.epsilon
    xc, etax, dv, vc, vx = _cells(state)
    rho_c = profile.rho(xc)
    dev = etax - 1.0

    a_full = stencils.accel
    vt_c = 0.5 * (a_full[2:N + 2] + a_full[1:N + 1])

    xs_nodes = np.arange(1, N + 1) / N
    w_d2 = profile.rho_pow(xs_nodes, gamma - 1.0 + alpha)
    d2 = stencils.d2eta

    groups = {
        "kinetic": h * np.sum(rho_c * vc**2),
        "deviation_degenerate": h * np.sum(
            profile.rho_pow(xc, 1.0 - gamma + alpha) * dev**2),
        "curvature_weighted": h * np.sum(w_d2 * d2**2),
        "velocity_slope": eps**2 * h * np.sum(vx**2),
        "curvature_timeweighted": eps**2 * (1.0 + t) ** (-(gamma - 1.0) / gamma + alpha)
        * h * np.sum(d2**2),
        "acceleration": eps**4 * h * np.sum(rho_c * vt_c**2),
        "deviation_pressure": h * np.sum(profile.rho_gamma(xc) * dev**2) / eps**2,
        "sup_etax": float(np.max(etax)),
        "sup_inv_etax": float(np.max(1.0 / etax)),
    }
    return groups


def low_energy_EL(state: LagrangianState, profile: SteadyProfile,
                  params: Params, t: float | None = None,
                  stencils: DerivativeStencils | None = None) -> float:
    return float(sum(low_energy_groups(state, profile, params, t, stencils).values()))


def high_energy_EH(state: LagrangianState, profile: SteadyProfile,
                   params: Params, t: float | None = None,
                   stencils: DerivativeStencils | None = None) -> float:
    """High-order weighted energy: second time derivative plus weighted and
    time-weighted third differences."""
    if stencils is None:
        stencils = compute_stencils(state, profile, params)
    if t is None:
        t = state.t
    N, h = state.N, state.h
    gamma, alpha = profile.gamma, params.alpha
    eps = params.epsilon
    xc = (np.arange(1, N + 1) - 0.5) * h
    rho_c = profile.rho(xc)

    at = stencils.accel_t
    vtt_c = 0.5 * (at[2:N + 2] + at[1:N + 1])
    first = eps**8 * h * np.sum(rho_c * vtt_c**2)

    x3 = (np.arange(2, N + 1) - 0.5) * h  # centers for i = 2..N
    w3 = profile.rho_pow(x3, 3.0 * gamma - 3.0 + alpha)
    second = eps**2 * h * np.sum(w3 * stencils.d3eta**2)
    third = (eps**8 * (1.0 + t) ** (-(3.0 * gamma - 3.0 + alpha) / gamma)
             * h * np.sum(stencils.d3eta**2))
    return float(first + second + third)


def well_prepared_energy(state: LagrangianState, profile: SteadyProfile,
                         params: Params,
                         stencils: DerivativeStencils | None = None) -> float:
    """Low-order energy rescaled for data whose deviation is O(eps^2)."""
    if stencils is None:
        stencils = compute_stencils(state, profile, params)
    N, h = state.N, state.h
    gamma, alpha = profile.gamma, params.alpha
    eps = params.epsilon
    xc, etax, dv, vc, vx = _cells(state)
    rho_c = profile.rho(xc)
    dev = etax - 1.0
    a_full = stencils.accel
    vt_c = 0.5 * (a_full[2:N + 2] + a_full[1:N + 1])

    g1 = h * np.sum(rho_c * vc**2 + profile.rho_pow(xc, 1.0 - gamma + alpha) * dev**2)
    g2 = h * np.sum(vx**2 / eps**2 + rho_c * vt_c**2)
    g3 = h * np.sum(profile.rho_gamma(xc) * taylor_bracket(etax, gamma))
    return float(g1 / eps**4 + g2 + g3 / eps**6)


def qbar_bound(D0: float, M: float, e0: float) -> float:
    """Uniform two-sided Jacobian bound from the data: D0^2 * exp(4*sqrt(M*e0))."""
    if D0 < 1.0 or M <= 0.0 or e0 < 0.0:
        raise ValueError("qbar_bound requires D0 >= 1, M > 0, e0 >= 0")
    return float(D0**2 * np.exp(4.0 * np.sqrt(M * e0)))


def hardy_ratio(w, beta: float, profile: SteadyProfile, n: int = 2000):
    """Weighted-norm ratio for the degenerate Hardy inequality.

    lhs = int rho^beta w^2, rhs = int rho^(beta+2(gamma-1)) w_x^2, both by
    midpoint quadrature on n cells; w is a callable with w(0) = 0 for the
    refined form.  Returns (lhs, rhs, lhs/rhs); ratio is 0 by convention for
    w identically zero.
    """
    if beta <= -(profile.gamma - 1.0):
        raise ValueError("beta must exceed -(gamma - 1)")
    h = 1.0 / n
    xm = (np.arange(n) + 0.5) * h
    xn = np.arange(n + 1) * h
    wm = np.asarray([float(w(x)) for x in xm])
    wn = np.asarray([float(w(x)) for x in xn])
    wx = (wn[1:] - wn[:-1]) / h
    lhs = float(h * np.sum(profile.rho_pow(xm, beta) * wm**2))
    rhs = float(h * np.sum(
        profile.rho_pow(xm, beta + 2.0 * (profile.gamma - 1.0)) * wx**2))
    ratio = 0.0 if lhs == 0.0 else lhs / rhs
    return lhs, rhs, ratio


def decay_monitor(ts, qs, theta: float):
    """Supremum of (1+t)^theta * q(t) over the samples and where it occurs."""
    ts = np.asarray(ts, dtype=float)
    qs = np.asarray(qs, dtype=float)
    weighted = (1.0 + ts) ** theta * qs
    k = int(np.argmax(weighted))
    return float(weighted[k]), float(ts[k])


CSV_COLUMNS = ("t", "E", "D", "EN", "EL", "EH", "EL_tilde",
               "min_etax", "max_etax", "qbar", "gamma_fb", "mass")


@dataclass
class DiagnosticsRecord:
    t: float
    E: float
    D: float
    EN: float
    EL: float
    EH: float
    EL_tilde: float
    min_etax: float
    max_etax: float
    qbar: float
    gamma_fb: float
    mass: float

    def row(self) -> tuple:
        return (self.t, self.E, self.D, self.EN, self.EL, self.EH,
                self.EL_tilde, self.min_etax, self.max_etax, self.qbar,
                self.gamma_fb, self.mass)


def diagnostics_record(state: LagrangianState, profile: SteadyProfile,
                       params: Params, qbar: float = float("nan")) -> DiagnosticsRecord:
    from .scheme import eulerian_mass, free_boundary

    stencils = compute_stencils(state, profile, params)
    etax = state.interior_etax()
    return DiagnosticsRecord(
        t=state.t,
        E=basic_energy(state, profile, params),
        D=dissipation(state),
        EN=discrete_energy_EN(state, profile, params, stencils),
        EL=low_energy_EL(state, profile, params, state.t, stencils),
        EH=high_energy_EH(state, profile, params, state.t, stencils),
        EL_tilde=well_prepared_energy(state, profile, params, stencils),
        min_etax=float(np.min(etax)),
        max_etax=float(np.max(etax)),
        qbar=qbar,
        gamma_fb=free_boundary(state),
        mass=eulerian_mass(state, profile),
    )
