"""Exception hierarchy shared by the estimators, the simulator and the harness."""


class EstimationError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(EstimationError, ValueError):
    """Invalid estimator, actuator or experiment configuration."""


class DegenerateInnovationError(EstimationError, ArithmeticError):
    """Innovation variance is exactly zero (zero voltage noise and a singular prior along H)."""


class ResetDegenerateError(EstimationError, ArithmeticError):
    """Integral reset requested over a cycle whose current sum cannot define a resistance."""


class NonPhysicalInductanceError(EstimationError, ValueError):
    """Inductance estimate is zero or negative, so the reluctance is undefined."""


class SimulationError(EstimationError, RuntimeError):
    """Base class for actuator simulation failures."""


class SaturationError(SimulationError):
    """Flux linkage reached the saturation singularity of the iron reluctance."""


class StepSizeError(SimulationError):
    """Integration step large enough to push the flux linkage past saturation."""


class ParseError(EstimationError, ValueError):
    """Malformed CSV or config input; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(EstimationError, ValueError):
    """Input is well-formed but violates the expected schema (headers, timestamps)."""


class EmptyInputError(ParseError):
    """Input file holds no data rows."""
