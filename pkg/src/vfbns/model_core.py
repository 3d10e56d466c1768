"""Hydrostatic background state for a 1-D isentropic gas column over vacuum.

The column sits on a rigid bottom at x = 0 under constant gravity g and
connects continuously to vacuum at x = l_bar.  With pressure law p = rho^gamma
(gamma > 1), hydrostatic balance (rho^gamma)' = -rho*g integrates to

    rho(x)^(gamma-1) = (g*(gamma-1)/gamma) * (l_bar - x),   0 <= x <= l_bar,

extended by zero for x > l_bar, so rho^(gamma-1) vanishes linearly at the
interface (physical-vacuum degeneracy).  The column length is tied to the
total mass M by l_bar = gamma/((gamma-1)*g) * (M*g)^((gamma-1)/gamma).

Everything downstream works in the normalized frame l_bar = 1, g = 1; this
module converts physical (gamma, g, M or l_bar) input into that frame once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Params",
    "SteadyProfile",
    "steady_density",
    "steady_mass",
    "normalize",
]


@dataclass(frozen=True)
class Params:
    """Physical and numerical configuration shared by all modules.

    gamma      adiabatic exponent, > 1
    epsilon    Mach = Froude number, in (0, 1]
    g          gravity (converted away by normalize())
    alpha      slack exponent in the weighted energies, > 0
    N          number of cells of the uniform mass grid, >= 4
    dt_safety  step-size safety factor, > 0 (values > 1 are allowed but unsafe)
    t_end      simulation horizon
    """

    gamma: float
    epsilon: float = 1.0
    g: float = 1.0
    alpha: float = 0.1
    N: int = 200
    dt_safety: float = 0.9
    t_end: float = 20.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not self.g > 0.0:
            raise ValueError(f"g must be positive, got {self.g}")
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.N < 4:
            raise ValueError(f"N must be at least 4, got {self.N}")
        if not self.dt_safety > 0.0:
            raise ValueError(f"dt_safety must be positive, got {self.dt_safety}")
        if self.t_end < 0.0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")


@dataclass(frozen=True)
class SteadyProfile:
    """Closed-form background density and its derived constants.

    The density is exposed as an evaluator, not a sampled array, so callers
    can evaluate it exactly at nodes, cell centers or ghost locations; the
    degenerate weights rho^(1-gamma+alpha) rely on the exact vanishing at
    x = l_bar rather than interpolation.
    """

    gamma: float
    g: float
    l_bar: float
    M: float

    @property
    def slope(self) -> float:
        """Coefficient s in rho^(gamma-1)(x) = s*(l_bar - x)."""
        return self.g * (self.gamma - 1.0) / self.gamma

    def rho(self, x):
        """Background density at x (scalar or array), zero beyond l_bar."""
        base = np.maximum(self.slope * (self.l_bar - np.asarray(x, dtype=float)), 0.0)
        out = base ** (1.0 / (self.gamma - 1.0))
        return out if out.ndim else float(out)

    def rho_pow(self, x, p: float):
        """rho(x)**p evaluated stably through the affine form of rho^(gamma-1).

        For negative p the result diverges as x -> l_bar; callers are expected
        to evaluate only at strictly interior points in that case.
        """
        base = np.maximum(self.slope * (self.l_bar - np.asarray(x, dtype=float)), 0.0)
        out = base ** (p / (self.gamma - 1.0))
        return out if out.ndim else float(out)

    def rho_gamma(self, x):
        """Background pressure rho(x)**gamma."""
        return self.rho_pow(x, self.gamma)

    def cumulative_mass(self, x):
        """Mass of the column below position x: integral of rho over [0, x]."""
        base = np.maximum(self.slope * (self.l_bar - np.asarray(x, dtype=float)), 0.0)
        tail = self.g ** (1.0 / (self.gamma - 1.0)) * (base / self.g) ** (
            self.gamma / (self.gamma - 1.0)
        )
        out = self.M - tail
        return out if out.ndim else float(out)


def steady_density(profile: SteadyProfile, x) -> float:
    """Background density at x >= 0 (total function; zero beyond l_bar)."""
    return profile.rho(x)


def steady_mass(gamma: float, g: float, l_bar: float) -> float:
    """Total mass of the hydrostatic column of length l_bar."""
    if not (gamma > 1.0 and g > 0.0 and l_bar > 0.0):
        raise ValueError("steady_mass requires gamma > 1, g > 0, l_bar > 0")
    return (l_bar * (gamma - 1.0) * g / gamma) ** (gamma / (gamma - 1.0)) / g


def normalize(params: Params) -> tuple[Params, SteadyProfile]:
    """Return params together with the background profile in the l_bar = 1,
    g = 1 frame all other modules operate in."""
    M = steady_mass(params.gamma, 1.0, 1.0)
    return params, SteadyProfile(gamma=params.gamma, g=1.0, l_bar=1.0, M=M)
