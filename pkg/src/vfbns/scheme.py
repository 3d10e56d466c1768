"""Spatial semi-discretization of the Lagrangian vacuum free-boundary flow.

State lives on a uniform mass grid x_i = i*h, h = 1/N.  Node velocities v^i
and flow-map positions eta^i evolve by the method of lines:

    (eta^i)' = v^i
    rho_i (v^i)' = visc_i - pressure_i / eps^2,     i = 1..N-1

with the flux difference

    pressure_i = (1/h) * { P_{i+1}*[(h/w_{i+1})^gamma - 1]
                           - P_i*[(h/w_i)^gamma - 1] }
    visc_i     = (1/h) * [ (v^{i+1}-v^i)/w_{i+1} - (v^i-v^{i-1})/w_i ]

where w_j = eta^j - eta^{j-1} is the width of cell j (nodes j-1..j),
rho_i = rho(x_i) and P_i = rho(x_i)^gamma.  rho_N = 0 at the vacuum node, so
the flux from cell N+0.5 vanishes identically and hydrostatic balance is
preserved exactly: at w == h every bracket is zero.

Boundary and ghost bookkeeping:
    v^0 = 0,   v^N = v^{N-1},   v^{-1} = 0,   v^{N+1} = v^N
    eta^0 = 0, eta^{-1} = 0,    w_N and w_{N+1} frozen at initial values.

Cell widths are carried in the state and advanced by velocity differences;
this realizes the frozen boundary increments exactly under any integrator and
keeps the discrete equilibrium (w == h bitwise) an exact floating-point fixed
point.  Node positions are reconstructed by prefix sum on demand.

Array layout: v has N+3 entries for nodes -1..N+1 (node i at index i+1);
w has N+1 entries for cells 1..N+1 (cell i at index i-1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model_core import Params, SteadyProfile

__all__ = [
    "JacobianCollapseError",
    "LagrangianState",
    "RhsVector",
    "build_state",
    "state_from_arrays",
    "pressure_term",
    "viscous_term",
    "rhs",
    "eulerian_density",
    "eulerian_mass",
    "free_boundary",
]

# Cell widths at or below this are treated as Jacobian collapse.
WIDTH_FLOOR = 1e-12


class JacobianCollapseError(RuntimeError):
    """A cell width reached zero (or the collapse floor); the run is invalid."""

    def __init__(self, message: str, time: float = float("nan")):
        super().__init__(message)
        self.time = time


@dataclass
class LagrangianState:
    """Velocities, cell widths and time of the semi-discrete flow map."""

    t: float
    v: np.ndarray  # nodes -1..N+1, shape (N+3,)
    w: np.ndarray  # cells 1..N+1, shape (N+1,)
    h: float

    @property
    def N(self) -> int:
        return self.w.shape[0] - 1

    def node(self, i: int) -> int:
        """Array index of node i in self.v."""
        return i + 1

    def v_node(self, i: int) -> float:
        return float(self.v[i + 1])

    def w_cell(self, i: int) -> float:
        """Width of cell i (between nodes i-1 and i), 1 <= i <= N+1."""
        return float(self.w[i - 1])

    @property
    def eta(self) -> np.ndarray:
        """Node positions -1..N+1 reconstructed from widths (eta^0 = 0)."""
        out = np.empty(self.N + 3)
        out[0] = 0.0  # node -1
        out[1] = 0.0  # node 0
        out[2:] = np.cumsum(self.w)
        return out

    @property
    def etax(self) -> np.ndarray:
        """Jacobian per cell, w_i/h for cells 1..N+1."""
        return self.w / self.h

    def interior_etax(self) -> np.ndarray:
        """Jacobian on the physical cells 1..N."""
        return self.w[:-1] / self.h

    def copy(self) -> "LagrangianState":
        return LagrangianState(self.t, self.v.copy(), self.w.copy(), self.h)

    def validate(self):
        N = self.N
        if self.v.shape != (N + 3,):
            raise ValueError("velocity array has wrong length")
        if not np.all(np.isfinite(self.v)) or not np.all(np.isfinite(self.w)):
            raise JacobianCollapseError("non-finite state", self.t)
        if np.min(self.w[:N]) <= WIDTH_FLOOR:
            raise JacobianCollapseError(
                f"cell width {np.min(self.w[:N]):.3e} at or below floor", self.t
            )
        if self.v[0] != 0.0 or self.v[1] != 0.0:
            raise ValueError("bottom velocity constraints violated")
        if self.v[N + 1] != self.v[N] or self.v[N + 2] != self.v[N + 1]:
            raise ValueError("vacuum-end velocity constraints violated")


@dataclass
class RhsVector:
    """Accelerations (v^i)' for the interior nodes i = 1..N-1."""

    accel: np.ndarray

    def full(self) -> np.ndarray:
        """Accelerations on nodes -1..N+1 with boundary values applied:
        a^0 = a^{-1} = 0 and a^N = a^{N+1} = a^{N-1}."""
        n = self.accel.shape[0] + 2  # = N+1 nodes 0..N
        out = np.zeros(n + 2)
        out[2:n] = self.accel
        out[n] = self.accel[-1]
        out[n + 1] = out[n]
        return out


def build_state(profile: SteadyProfile, N: int, eta0, v0) -> LagrangianState:
    """Sample initial profiles at the grid nodes and set up the ghost rules.

    eta0 must be callable on [0, 1 + 1/N] with eta0(0) = 0 and strictly
    increasing; v0 callable on [0, 1] with v0(0) = 0.
    """
    h = 1.0 / N
    xs = h * np.arange(N + 2)  # nodes 0..N+1
    eta_nodes = np.asarray([float(eta0(x)) for x in xs])
    if abs(eta_nodes[0]) > 1e-14:
        raise ValueError("eta0(0) must vanish")
    eta_nodes[0] = 0.0
    w = np.diff(eta_nodes)  # cells 1..N+1
    if np.min(w[:N]) <= 0.0:
        raise ValueError("eta0 must be strictly increasing (Jacobian positivity)")

    v = np.zeros(N + 3)
    v[2:N + 1] = [float(v0(x)) for x in xs[1:N]]
    v[0] = 0.0
    v[1] = 0.0
    v[N + 1] = v[N]  # v^N = v^{N-1}
    v[N + 2] = v[N + 1]
    state = LagrangianState(t=0.0, v=v, w=w, h=h)
    state.validate()
    return state


def state_from_arrays(N: int, v_interior: np.ndarray, w_cells: np.ndarray,
                      t: float = 0.0) -> LagrangianState:
    """Assemble a state from interior velocities (nodes 1..N-1) and the full
    width array (cells 1..N+1), applying all boundary/ghost rules."""
    h = 1.0 / N
    v = np.zeros(N + 3)
    v[2:N + 1] = v_interior
    v[N + 1] = v[N]
    v[N + 2] = v[N + 1]
    return LagrangianState(t=t, v=v, w=np.asarray(w_cells, dtype=float), h=h)


def _node_rho(profile: SteadyProfile, N: int) -> np.ndarray:
    """rho at nodes 0..N; the vacuum node value is exactly zero."""
    xs = np.arange(N + 1) / N
    r = profile.rho(xs)
    r[N] = 0.0
    return r


def _node_rho_gamma(profile: SteadyProfile, N: int) -> np.ndarray:
    xs = np.arange(N + 1) / N
    p = profile.rho_gamma(xs)
    p[N] = 0.0
    return p


def _pressure_brackets(state: LagrangianState, profile: SteadyProfile) -> np.ndarray:
    """B_j = P_j * [(h/w_j)^gamma - 1] for cells j = 1..N (B_N = 0)."""
    N = state.N
    Pg = _node_rho_gamma(profile, N)[1:]  # nodes 1..N
    y = state.h / state.w[:N]
    return Pg * (y ** profile.gamma - 1.0)


def pressure_term(state: LagrangianState, profile: SteadyProfile,
                  params: Params, i: int) -> float:
    """Flux difference of the background-relative pressure at node i.

    The eps^-2 factor is NOT included; see rhs().  At i = N-1 the upper
    bracket vanishes identically because rho_N = 0.
    """
    if not 1 <= i <= state.N - 1:
        raise IndexError("pressure_term is defined on interior nodes 1..N-1")
    B = _pressure_brackets(state, profile)
    val = (B[i] - B[i - 1]) / state.h  # cells i+1 and i (0-based offsets)
    if not np.isfinite(val):
        raise JacobianCollapseError("pressure flux non-finite", state.t)
    return float(val)


def viscous_term(state: LagrangianState, i: int) -> float:
    """Difference of velocity gradients at node i."""
    N = state.N
    if not 1 <= i <= N - 1:
        raise IndexError("viscous_term is defined on interior nodes 1..N-1")
    v, w, h = state.v, state.w, state.h
    up = (v[i + 2] - v[i + 1]) / w[i]      # cell i+1
    dn = (v[i + 1] - v[i]) / w[i - 1]      # cell i
    val = (up - dn) / h
    if not np.isfinite(val):
        raise JacobianCollapseError("viscous flux non-finite", state.t)
    return float(val)


def rhs(state: LagrangianState, profile: SteadyProfile, params: Params) -> RhsVector:
    """Accelerations of the interior nodes.

    Identically zero at the discrete equilibrium (w == h, v == 0): both
    pressure brackets vanish there, which is the discrete hydrostatic
    balance.
    """
    N = state.N
    h = state.h
    v, w = state.v, state.w
    if np.min(w[:N]) <= 0.0:
        raise JacobianCollapseError("nonpositive cell width", state.t)
    rho = _node_rho(profile, N)[1:N]        # nodes 1..N-1
    B = _pressure_brackets(state, profile)  # cells 1..N

    grad = (v[2:N + 2] - v[1:N + 1]) / w[:N]   # (v^j - v^{j-1})/w_j, cells 1..N
    visc = (grad[1:] - grad[:-1]) / h          # nodes 1..N-1
    pres = (B[1:] - B[:-1]) / h                # nodes 1..N-1
    accel = (visc - pres / params.epsilon**2) / rho
    if not np.all(np.isfinite(accel)):
        raise JacobianCollapseError("acceleration non-finite", state.t)
    return RhsVector(accel=accel)


def eulerian_density(state: LagrangianState, profile: SteadyProfile):
    """Density against physical position, sampled at cell-midpoint images.

    Returns (positions, densities) for cells 1..N; density is the background
    value at the cell center divided by the cell Jacobian.
    """
    N = state.N
    eta = state.eta
    xc = (np.arange(1, N + 1) - 0.5) * state.h
    pos = 0.5 * (eta[2:N + 2] + eta[1:N + 1])
    dens = profile.rho(xc) * state.h / state.w[:N]
    return pos, dens


def eulerian_mass(state: LagrangianState, profile: SteadyProfile) -> float:
    """Total mass of the reconstructed Eulerian density (midpoint rule)."""
    _, dens = eulerian_density(state, profile)
    return float(np.sum(dens * state.w[:state.N]))


def free_boundary(state: LagrangianState) -> float:
    """Position of the gas-vacuum interface, eta^N."""
    return float(np.sum(state.w[:state.N]))
