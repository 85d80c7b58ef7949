"""Exception types shared across the package.

The CLI maps each class to a process exit code, so library code raises the
most specific one that applies.
"""


class ThreeSpinError(Exception):
    """Base class for all package errors."""


class ConfigError(ThreeSpinError, ValueError):
    """Invalid user configuration (schema, unknown preset, bad field)."""


class PhysicsError(ThreeSpinError, ValueError):
    """A physics precondition is violated (zero detuning, unstable chain, ...)."""


class NumericalError(ThreeSpinError, RuntimeError):
    """Numerical failure during a run, e.g. norm drift beyond tolerance."""


class DimensionError(ConfigError):
    """Requested Hilbert-space dimension exceeds the configured cap."""
