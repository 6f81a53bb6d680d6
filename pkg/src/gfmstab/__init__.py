"""Fault recovery and transient stability of a current-limited grid-forming converter."""

__version__ = "0.1.0"

from .analytics import (  # noqa: E402
    Region, classify_region, entering_set, equilibria, p_sat, p_unsat, returning_set,
    saturation_threshold, v_sat,
)
from .angleset import AngleSet, wrap_angle  # noqa: E402
from .hybrid_sim import Mode, SimConfig, SystemState, integrate  # noqa: E402
from .params import (  # noqa: E402
    ConverterParams, GridParams, ParameterError, reference_converter, reference_grid,
)
from .scenario import Outcome, OutcomeKind, Scenario, builtin_case, run  # noqa: E402
