"""Exception types shared across the package."""


class FdcimError(Exception):
    """Base class for all package errors."""


class CapacityError(FdcimError):
    """A requested size exceeds the configured platform budget."""


class ShapeError(FdcimError):
    """Vector or matrix dimensions violate an operation's contract."""


class ParameterError(FdcimError):
    """A numeric parameter is outside its legal domain."""


class CrossbarProgrammingError(FdcimError):
    """A crossbar was programmed with entries outside {-1, +1}."""


class ConfigError(FdcimError):
    """A configuration value or experiment description is invalid."""
