"""Online resistance, inductance and flux-linkage estimation for reluctance actuators.

``filter_core`` holds the recursive stochastic filter, ``integral_estimator``
the cyclic integral estimator, ``observability`` the structural analysis,
``actuator_sim`` the ground-truth plunger model and ``harness`` the CLI and
experiment layer.  Hot loops run in a compiled extension when it is built and
in ``_pykernels`` otherwise; ``BACKEND`` names the one in use.
"""

from ._backend import BACKEND, available_backends
from .errors import (
    ConfigurationError,
    DegenerateInnovationError,
    EmptyInputError,
    EstimationError,
    NonPhysicalInductanceError,
    ParseError,
    ResetDegenerateError,
    SaturationError,
    SchemaError,
    SimulationError,
    StepSizeError,
)
from .filter_core import (
    RELAY_FILTER,
    VALVE_FILTER,
    FilterConfig,
    derived_estimates,
    filter_init,
    filter_step,
    run_filter,
)
from .frames import EstimateFrame, EstimateSeries, Quality
from .integral_estimator import IntegralConfig, integral_init, integral_step, offline_estimate, run_integral

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "available_backends",
    "ConfigurationError",
    "DegenerateInnovationError",
    "EmptyInputError",
    "EstimationError",
    "NonPhysicalInductanceError",
    "ParseError",
    "ResetDegenerateError",
    "SaturationError",
    "SchemaError",
    "SimulationError",
    "StepSizeError",
    "FilterConfig",
    "VALVE_FILTER",
    "RELAY_FILTER",
    "filter_init",
    "filter_step",
    "run_filter",
    "derived_estimates",
    "EstimateFrame",
    "EstimateSeries",
    "Quality",
    "IntegralConfig",
    "integral_init",
    "integral_step",
    "run_integral",
    "offline_estimate",
]
