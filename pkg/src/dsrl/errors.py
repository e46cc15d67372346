"""Exception types raised by the simulator."""


class DSRLError(Exception):
    """Base class for all errors raised by this package."""


class GenerationExhausted(DSRLError, RuntimeError):
    """No valid network layout was found within the attempt budget."""


class IndexOutOfRange(DSRLError, IndexError):
    pass


class DimensionMismatch(DSRLError, ValueError):
    pass


class SizeMismatch(DSRLError, ValueError):
    pass


class NonFiniteState(DSRLError, FloatingPointError):
    """An iterate became NaN or infinite (usually a divergent schedule)."""


class ConfigInvalid(DSRLError, ValueError):
    """Raised with a dotted field path, e.g. ``scenario.sweep.start: ...``."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
