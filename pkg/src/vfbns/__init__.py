"""1-D vacuum free-boundary compressible Navier-Stokes lab.

Simulates a viscous isentropic gas column over vacuum in Lagrangian mass
coordinates with an energy-dissipative finite-difference scheme, and checks
its steady states, dissipation structure, decay rates and the joint low
Mach/Froude limit eps -> 0.
"""

from .model_core import Params, SteadyProfile, normalize, steady_density, steady_mass

__version__ = "0.1.0"

__all__ = [
    "Params",
    "SteadyProfile",
    "normalize",
    "steady_density",
    "steady_mass",
    "__version__",
]
