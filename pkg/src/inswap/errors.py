"""Exception types raised across the toolkit."""


class InswapError(Exception):
    """Base class for toolkit errors."""


class InvalidArgumentError(InswapError, ValueError):
    pass


class CapacityExceededError(InswapError):
    """A permutation set or weight table would exceed its configured cap."""

    def __init__(self, message: str, cap: int):
        super().__init__(message)
        self.cap = cap


class SingularConfigurationError(InswapError, ArithmeticError):
    """The potential cannot be evaluated (e.g. two coincident atoms)."""


class UnsupportedDimensionError(InswapError, ValueError):
    pass


class InsufficientDataError(InswapError):
    pass


class InvalidStepError(InswapError, ValueError):
    """Time step too large for the first-order jump approximation."""


class ConfigError(InswapError, ValueError):
    pass
