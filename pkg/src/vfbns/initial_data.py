"""Initial data families and compatibility diagnostics.

Families
--------
equilibrium     eta0 = identity, v0 = 0 (the hydrostatic state).
ill_prepared    eta0_x = 1 + a*phi, v0 = a*psi with a = delta*eps: the
                background-relative deviation is O(eps) but the initial
                acceleration scales like 1/eps (pressure imbalance).
well_prepared   same shapes with a = delta*eps^2, so the initial
                acceleration stays bounded as eps -> 0.
from_density    eta0 obtained by inverting the cumulative-mass identity

                    integral_0^{eta0(x)} rho0 = integral_0^x rho_bar

                for a user-supplied initial density rho0 with the same total
                mass (root finding on the monotone cumulative mass).

The default shape pair satisfies the boundary compatibility v0(0) = 0,
v0_x(1) = 0 exactly:

    phi(x) = cos(pi x) * (1 - x)^2        (cutoff vanishes to 2nd order at 1)
    psi(x) = (256/27) * x * (1 - x)^3     (max 1, attained at x = 1/4)

psi also has vanishing curvature at the vacuum end; without that the initial
acceleration behaves like 1/rho there and the weighted acceleration integral
in the low-order energy diverges as the grid refines, breaking the uniform
boundedness the well-prepared scaling is supposed to deliver.  phi's
antiderivative is closed-form, so eta0 is evaluated exactly (no cumulative
quadrature) including at the ghost node 1 + h.

Compatibility diagnostics
-------------------------
The first and second time derivatives of velocity at t = 0 are determined by
the data through

    rho*h1 = (v0x/eta0x)_x - (1/eps^2) * [ (rho^gamma / eta0x^gamma)_x + rho*g ]
    rho*h2 = (gamma/eps^2) * (rho^gamma * v0x / eta0x^(gamma+1))_x
             + ( (eta0x*h1x - v0x^2) / eta0x^2 )_x

Classical solvability needs h1(0) = 0 and h1x(1) = 0 on top of v0(0) = 0,
v0x(1) = 0; the reports carry those residuals.  The pressure-gradient terms
are expanded with the exact steady identity (rho^gamma)_x = -rho*g before any
differencing, so the equilibrium and uniform-compression cases evaluate
exactly; only eta0x, eta0xx and the v0 terms use centered differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .model_core import Params, SteadyProfile
from .scheme import LagrangianState, build_state

__all__ = [
    "DataFamily",
    "InitialProfiles",
    "CompatibilityReport",
    "equilibrium_data",
    "equilibrium_state",
    "perturbed_data",
    "build_initial_state",
    "diffeomorphism_from_density",
    "compatibility_h1",
    "compatibility_h2",
    "compatibility_report",
]

KINDS = ("equilibrium", "ill_prepared", "well_prepared", "from_density")


@dataclass(frozen=True)
class DataFamily:
    kind: str = "equilibrium"
    delta: float = 0.0
    shape: str = "cos_bump"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown data family kind {self.kind!r}")
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape id {self.shape!r}")


@dataclass(frozen=True)
class InitialProfiles:
    """Initial flow map and velocity with whatever derivatives are known in
    closed form (None means: approximate by centered differences)."""

    eta: Callable[[float], float]
    v: Callable[[float], float]
    etax: Callable[[float], float] | None = None
    etaxx: Callable[[float], float] | None = None
    vx: Callable[[float], float] | None = None
    D0: float = 1.0


def _phi_cos_bump(x):
    return math.cos(math.pi * x) * (1.0 - x) ** 2


def _phi_cos_bump_int(x):
    # antiderivative of cos(pi x)(1-x)^2 with value 0 at x = 0
    pi = math.pi
    s, c = math.sin(pi * x), math.cos(pi * x)
    return ((1.0 - x) ** 2 * s / pi - 2.0 * (1.0 - x) * c / pi**2
            + 2.0 / pi**2 - 2.0 * s / pi**3)


def _phi_cos_bump_d(x):
    pi = math.pi
    return (-pi * math.sin(pi * x) * (1.0 - x) ** 2
            - 2.0 * math.cos(pi * x) * (1.0 - x))


_PSI_SCALE = 256.0 / 27.0


def _psi_cubic_bump(x):
    return _PSI_SCALE * x * (1.0 - x) ** 3


def _psi_cubic_bump_d(x):
    return _PSI_SCALE * (1.0 - x) ** 2 * (1.0 - 4.0 * x)


# shape id -> (phi, antiderivative of phi, phi', psi, psi')
SHAPES = {
    "cos_bump": (_phi_cos_bump, _phi_cos_bump_int, _phi_cos_bump_d,
                 _psi_cubic_bump, _psi_cubic_bump_d),
}


def equilibrium_data(profile: SteadyProfile, N: int) -> InitialProfiles:
    return InitialProfiles(
        eta=lambda x: x, v=lambda x: 0.0,
        etax=lambda x: 1.0, etaxx=lambda x: 0.0, vx=lambda x: 0.0, D0=1.0,
    )


def equilibrium_state(profile: SteadyProfile, N: int) -> LagrangianState:
    """Discrete equilibrium with cell widths exactly h.

    Sampling the identity map and re-differencing would perturb the widths by
    one ulp, which is enough to break the exact fixed-point property; the
    widths are therefore set directly.
    """
    h = 1.0 / N
    return LagrangianState(t=0.0, v=np.zeros(N + 3), w=np.full(N + 1, h), h=h)


def perturbed_data(profile: SteadyProfile, N: int, family: DataFamily,
                   epsilon: float) -> InitialProfiles:
    """Perturbation of the equilibrium: eta0_x = 1 + a*phi, v0 = a*psi.

    a = delta*eps for ill-prepared data (deviation O(eps), acceleration
    O(1/eps)); a = delta*eps^2 for well-prepared data.
    """
    phi, phi_int, phi_d, psi, psi_d = SHAPES[family.shape]
    if family.kind == "equilibrium" or family.delta == 0.0:
        return equilibrium_data(profile, N)
    if family.kind == "ill_prepared":
        a = family.delta * epsilon
    elif family.kind == "well_prepared":
        a = family.delta * epsilon**2
    else:
        raise ValueError(f"perturbed_data cannot build kind {family.kind!r}")

    h = 1.0 / N
    xs = np.linspace(0.0, 1.0 + h, 4 * N + 1)
    etax_samples = 1.0 + a * np.asarray([phi(x) for x in xs])
    if np.min(etax_samples) <= 0.0:
        raise ValueError(
            f"perturbation amplitude {a} makes the initial Jacobian nonpositive"
        )
    D0 = max(np.max(etax_samples), np.max(1.0 / etax_samples))
    return InitialProfiles(
        eta=lambda x: x + a * phi_int(x),
        v=lambda x: a * psi(x),
        etax=lambda x: 1.0 + a * phi(x),
        etaxx=lambda x: a * phi_d(x),
        vx=lambda x: a * psi_d(x),
        D0=float(D0),
    )


def build_initial_state(profile: SteadyProfile, params: Params,
                        family: DataFamily) -> tuple[LagrangianState, float]:
    """State plus the measured two-sided Jacobian bound D0 of the data."""
    if family.kind == "from_density":
        raise ValueError(
            "from_density needs a density callable: use "
            "diffeomorphism_from_density + state_from_map_nodes"
        )
    if family.kind == "equilibrium" or family.delta == 0.0:
        return equilibrium_state(profile, params.N), 1.0
    data = perturbed_data(profile, params.N, family, params.epsilon)
    state = build_state(profile, params.N, data.eta, data.v)
    etax = state.interior_etax()
    D0 = max(np.max(etax), np.max(1.0 / etax), data.D0)
    return state, float(D0)


def state_from_map_nodes(eta_nodes: np.ndarray, v0=None) -> LagrangianState:
    """State from flow-map node values 0..N (e.g. a diffeomorphism inversion).

    The ghost increment past the free boundary copies the last real one (the
    map is only defined up to the boundary).
    """
    eta_nodes = np.asarray(eta_nodes, dtype=float)
    N = eta_nodes.shape[0] - 1
    w = np.empty(N + 1)
    w[:N] = np.diff(eta_nodes)
    w[N] = w[N - 1]
    if np.min(w[:N]) <= 0.0:
        raise ValueError("flow-map nodes must be strictly increasing")
    vi = np.zeros(N - 1)
    if v0 is not None:
        vi = np.asarray([float(v0(i / N)) for i in range(1, N)])
    from .scheme import state_from_arrays

    return state_from_arrays(N, vi, w)


def diffeomorphism_from_density(rho0: Callable[[float], float], l0: float,
                                profile: SteadyProfile, N: int,
                                mass_tol: float = 1e-6,
                                root_tol: float = 1e-12) -> np.ndarray:
    """Invert the cumulative-mass identity for the initial flow map.

    rho0 must be positive on [0, l0), vanish at l0, and carry the same total
    mass as the background.  Returns eta0 at the nodes 0..N; the solve brackets
    each node value by monotonicity and refines with Brent's method so the
    cumulative-mass identity holds to ~root_tol at every node.
    """
    total, quad_err = quad(rho0, 0.0, l0, limit=200)
    if abs(total - profile.M) > mass_tol * max(profile.M, 1.0):
        raise ValueError(
            f"initial density mass {total} does not match background mass {profile.M}"
        )

    # cumulative mass of rho0, continued monotonically past each solved node
    def cumulative(s, lo=0.0, acc=0.0):
        val, _ = quad(rho0, lo, s, limit=200)
        return acc + val

    xs = np.arange(N + 1) / N
    targets = profile.cumulative_mass(xs)
    targets[N] = profile.M
    eta_nodes = np.empty(N + 1)
    eta_nodes[0] = 0.0
    eta_nodes[N] = l0
    prev = 0.0
    acc = 0.0
    for i in range(1, N):
        f = lambda s: cumulative(s, prev, acc) - targets[i]
        lo, hi = prev, l0
        root = brentq(f, lo, hi, xtol=root_tol)
        acc = cumulative(root, prev, acc)
        prev = root
        eta_nodes[i] = root
        if eta_nodes[i] <= eta_nodes[i - 1]:
            raise ValueError("cumulative mass of rho0 is not strictly increasing")
    return eta_nodes


@dataclass
class CompatibilityReport:
    x: np.ndarray
    h1: np.ndarray
    h2: np.ndarray | None
    residual_v0_at_0: float
    residual_v0x_at_1: float
    residual_h1_at_0: float
    residual_h1x_at_1: float
    tol: float = 1e-8
    excluded_nodes: int = 1  # the vacuum node, where rho = 0

    @property
    def v0_ok(self) -> bool:
        return self.residual_v0_at_0 <= self.tol

    @property
    def v0x_ok(self) -> bool:
        return self.residual_v0x_at_1 <= self.tol

    @property
    def h1_ok(self) -> bool:
        return self.residual_h1_at_0 <= self.tol

    @property
    def h1x_ok(self) -> bool:
        return self.residual_h1x_at_1 <= self.tol


def _sample_with_derivatives(data: InitialProfiles, N: int):
    """eta0x, eta0xx, v0, v0x at nodes 0..N (centered differences where no
    closed form is available; the sampling grid extends one ghost node past
    each end so interior stencils stay centered)."""
    h = 1.0 / N
    xs = h * np.arange(-1, N + 2)  # nodes -1..N+1

    def grid(f):
        return np.asarray([float(f(x)) for x in xs])

    eta = grid(data.eta)
    vv = grid(data.v)
    if data.etax is not None:
        etax = grid(data.etax)
    else:
        etax = np.gradient(eta, h)
    if data.etaxx is not None:
        etaxx = np.asarray([float(data.etaxx(x)) for x in xs[1:N + 2]])
    else:
        etaxx = (etax[2:] - etax[:-2]) / (2.0 * h)
    if data.vx is not None:
        vx = grid(data.vx)
    else:
        vx = np.gradient(vv, h)
    # restrict to nodes 0..N (etaxx already is)
    return xs[1:N + 2], eta[1:N + 2], etax[1:N + 2], etaxx[:N + 1], vv[1:N + 2], vx[1:N + 2]


def compatibility_h1(data: InitialProfiles, profile: SteadyProfile,
                     params: Params, tol: float = 1e-8) -> CompatibilityReport:
    """Initial acceleration h1 sampled where rho > 0, with boundary residuals.

    Using (rho^gamma)_x = -rho*g, the defining relation becomes

        rho*h1 = (v0x/eta0x)_x
                 + (1/eps^2) * [ rho*g*(eta0x^-gamma - 1)
                                 + gamma*rho^gamma*eta0x^(-gamma-1)*eta0xx ].

    Every term carries a factor rho or vanishes with the deviation, so the
    division by rho is benign away from the vacuum node (which is excluded).
    """
    N = params.N
    gamma, eps2 = profile.gamma, params.epsilon**2
    h = 1.0 / N
    xs, eta, etax, etaxx, vv, vx = _sample_with_derivatives(data, N)

    rho = profile.rho(xs)
    rho_g = profile.rho_gamma(xs)
    ratio = vx / etax
    dratio = np.empty(N + 1)
    dratio[1:-1] = (ratio[2:] - ratio[:-2]) / (2.0 * h)
    dratio[0] = (ratio[1] - ratio[0]) / h
    dratio[-1] = (ratio[-1] - ratio[-2]) / h

    bracket = rho * profile.g * (etax ** -gamma - 1.0) \
        + gamma * rho_g * etax ** (-gamma - 1.0) * etaxx
    keep = rho > 1e-12
    h1 = np.where(keep, (dratio + bracket / eps2) / np.where(keep, rho, 1.0), 0.0)
    x_kept = xs[keep]
    h1_kept = h1[keep]

    res_h1_0 = abs(h1_kept[0])
    res_h1x_1 = abs((h1_kept[-1] - h1_kept[-2]) / (x_kept[-1] - x_kept[-2]))
    report = CompatibilityReport(
        x=x_kept, h1=h1_kept, h2=None,
        residual_v0_at_0=abs(vv[0]),
        residual_v0x_at_1=abs(vx[N]),
        residual_h1_at_0=res_h1_0,
        residual_h1x_at_1=res_h1x_1,
        tol=tol,
        excluded_nodes=int(np.sum(~keep)),
    )
    return report


def compatibility_h2(data: InitialProfiles, profile: SteadyProfile,
                     params: Params, h1_report: CompatibilityReport | None = None,
                     tol: float = 1e-8) -> CompatibilityReport:
    """Second time derivative h2 at interior nodes, built on the h1 samples.

    rho*h2 = (gamma/eps^2)*(rho^gamma*W)_x + S_x with W = v0x/eta0x^(gamma+1)
    and S = (eta0x*h1x - v0x^2)/eta0x^2; the product rule with
    (rho^gamma)_x = -rho*g handles the degenerate weight exactly.
    """
    N = params.N
    gamma, eps2 = profile.gamma, params.epsilon**2
    h = 1.0 / N
    if h1_report is None:
        h1_report = compatibility_h1(data, profile, params, tol)
    xs, eta, etax, etaxx, vv, vx = _sample_with_derivatives(data, N)
    rho = profile.rho(xs)
    rho_g = profile.rho_gamma(xs)

    keep = rho > 1e-12
    n_kept = int(np.sum(keep))

    def centered(q):
        out = np.empty_like(q)
        out[1:-1] = (q[2:] - q[:-2]) / (2.0 * h)
        out[0] = (q[1] - q[0]) / h
        out[-1] = (q[-1] - q[-2]) / h
        return out

    W = vx / etax ** (gamma + 1.0)
    dW = centered(W)
    term_pressure = (gamma / eps2) * (-rho * profile.g * W + rho_g * dW)

    # h1 only exists on the kept subgrid; difference it there (one-sided at
    # its upper end) so the excluded vacuum node cannot pollute the gradient
    h1x_kept = centered(h1_report.h1)
    h1x = np.zeros(N + 1)
    h1x[keep] = h1x_kept
    S = (etax * h1x - vx**2) / etax**2
    dS = np.zeros(N + 1)
    dS[keep] = centered(S[keep])

    h2 = np.where(keep, (term_pressure + dS) / np.where(keep, rho, 1.0), 0.0)
    return CompatibilityReport(
        x=xs[keep], h1=h1_report.h1, h2=h2[keep],
        residual_v0_at_0=h1_report.residual_v0_at_0,
        residual_v0x_at_1=h1_report.residual_v0x_at_1,
        residual_h1_at_0=h1_report.residual_h1_at_0,
        residual_h1x_at_1=h1_report.residual_h1x_at_1,
        tol=tol,
        excluded_nodes=(N + 1) - n_kept,
    )


def compatibility_report(data: InitialProfiles, profile: SteadyProfile,
                         params: Params, tol: float = 1e-8) -> CompatibilityReport:
    """h1 and h2 in one report."""
    r1 = compatibility_h1(data, profile, params, tol)
    return compatibility_h2(data, profile, params, r1, tol)
