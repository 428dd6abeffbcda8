"""Exception hierarchy shared by all modules."""


class NanofiberError(Exception):
    """Base class for every error raised by this package."""


class DomainError(NanofiberError, ValueError):
    """A radius or parameter lies outside the region where a quantity is defined."""


class NoBracket(NanofiberError):
    """Mode solver could not bracket the HE11 root."""


class NonFinite(NanofiberError, ArithmeticError):
    """A special-function evaluation or integration step produced inf/nan."""


class GridMismatch(NanofiberError, ValueError):
    """A density factor was computed for a different (detuning, power)."""


class NoPeak(NanofiberError, ValueError):
    """Spectrum has no interior maximum with two half-maximum crossings."""


class NoConvergence(NanofiberError):
    """Offset search ended on the window edge."""


class ParseError(NanofiberError, ValueError):
    pass


class RangeError(NanofiberError, ValueError):
    pass


class GridError(NanofiberError, ValueError):
    pass


class ConfigError(NanofiberError, ValueError):
    """Invalid run configuration."""
