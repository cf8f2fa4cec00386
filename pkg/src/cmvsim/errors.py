"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


class UnsupportedDimensionError(ValueError):
    """A quadrature-based checker was asked for a dimension it cannot handle."""


class UnknownPresetError(ValueError):
    """Requested model preset does not exist."""


class NoOracleAvailableError(RuntimeError):
    """The model does not expose a closed-form limit drift."""


class UnsupportedLawError(ValueError):
    """Initial law has no closed-form density, so the requested check is unavailable."""


class StrategyUnsupportedError(ValueError):
    """Evaluation strategy is incompatible with the kernel (cell lists need compact support)."""


class SimulationDivergedError(RuntimeError):
    """A non-finite drift or position appeared during time stepping."""

    def __init__(self, message, step):
        super().__init__(f"{message} (step {step})")
        self.step = step


class DomainWidenError(RuntimeError):
    """Quadrature domain could not be widened enough to capture the density's tails."""


class ConfigError(ValueError):
    """Configuration file failed validation; ``key`` locates the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
