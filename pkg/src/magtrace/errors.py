"""Exception types shared by all modules."""

__all__ = ["MagtraceError", "ConfigurationError", "PreconditionError", "CapabilityError"]


class MagtraceError(Exception):
    """Base class for errors raised by the package."""


class ConfigurationError(MagtraceError, ValueError):
    """Inconsistent dimensions, grids, configs or quadrature setups."""


class PreconditionError(MagtraceError, ValueError):
    """An operation was called outside its domain of validity."""


class CapabilityError(MagtraceError, RuntimeError):
    """A derivative beyond the available order was requested."""
