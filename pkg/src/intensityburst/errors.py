"""Exception hierarchy. Every error carries a stable ``code`` for the CLI."""


class IntensityBurstError(ValueError):
    code = "error"


class ParameterError(IntensityBurstError):
    code = "invalid_parameter"


class CapacityError(IntensityBurstError):
    code = "capacity_exceeded"


class ConfigurationError(IntensityBurstError):
    code = "invalid_configuration"


class InputError(IntensityBurstError):
    code = "invalid_input"


class BoundaryError(IntensityBurstError):
    """Raised when an estimation window does not fit inside the session."""

    code = "insufficient_history"


class EstimationError(IntensityBurstError):
    code = "estimation_failed"


class FormatError(IntensityBurstError):
    code = "format_error"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
