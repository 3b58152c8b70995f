"""Exception hierarchy shared across the package."""


class RedlatError(Exception):
    """Base class for all package errors."""


class ConfigError(RedlatError):
    """Invalid user-facing configuration (CLI exit code 2)."""


class GuardError(RedlatError):
    """A scale or precondition guard was exceeded."""


class SmoothnessError(RedlatError):
    """Requested smoothness is outside the closed-form fast path."""


class NumericsError(RedlatError):
    """A numerical invariant was violated (signals an implementation bug)."""
