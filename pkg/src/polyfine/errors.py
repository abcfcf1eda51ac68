"""Exception types shared across the package."""


class PolyfineError(Exception):
    """Base class for all library errors."""


class InvalidModel(PolyfineError):
    pass


class ShapeMismatch(PolyfineError):
    pass


class NotDeterministic(PolyfineError):
    pass


class InvalidParams(PolyfineError):
    pass


class ConfigError(PolyfineError):
    pass


class ParseError(PolyfineError):
    pass


class InsufficientData(PolyfineError):
    pass


class NonPositiveValue(PolyfineError):
    pass


class BudgetExceeded(PolyfineError):
    """An algorithm asked the environment for more episodes than it was granted."""
