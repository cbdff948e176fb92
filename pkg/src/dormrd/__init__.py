"""Prey-predator reaction-diffusion toolkit with a dormant predator stage.

The library side constructs mild solutions by successive approximation on
short horizons, integrates the system with an exact-diffusion splitting on
long horizons, enumerates flat equilibria with their linearizations, and
checks invariant-box and absorption statements numerically.  The ``dormrd``
command line drives the same machinery from config files and renders
figures next to its delimited outputs.
"""

__version__ = "0.1.0"

from .errors import BracketError, ConfigError, ConvergenceError, NumericGuardError
from .grid import Field, Grid, State, Trajectory, constant_state, initial_data
from .model import Params, Thresholds, e1_params, e2_params, jacobian, reaction, thresholds

__all__ = [
    "BracketError",
    "ConfigError",
    "ConvergenceError",
    "Field",
    "Grid",
    "NumericGuardError",
    "Params",
    "State",
    "Thresholds",
    "Trajectory",
    "constant_state",
    "e1_params",
    "e2_params",
    "initial_data",
    "jacobian",
    "reaction",
    "thresholds",
    "__version__",
]
