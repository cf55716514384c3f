"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class GridMismatchError(ValueError):
    """Two fields, or a field and a driver, do not live on compatible grids."""


class ConfigurationError(ValueError):
    """An experiment or solver configuration is invalid."""


class StabilityError(ConfigurationError):
    """The explicit time step violates the stability gate of the Euler scheme."""
