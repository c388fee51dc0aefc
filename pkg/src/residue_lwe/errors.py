"""Exception types raised across the package."""


class ZqError(Exception):
    """Base class for all errors raised by this package."""


class ZeroInverse(ZqError, ZeroDivisionError):
    pass


class DimensionMismatch(ZqError, ValueError):
    pass


class ModulusMismatch(ZqError, ValueError):
    pass


class Singular(ZqError, ArithmeticError):
    pass


class DependentInput(ZqError, ValueError):
    pass


class WidthMismatch(ZqError, ValueError):
    pass


class NoRelativeDegree(ZqError, ValueError):
    """The output never depends on the input (J = 0 and H F^i G = 0 for i < n)."""


class NonzeroInitialOutput(ZqError, ValueError):
    pass


class InsufficientHistory(ZqError, ValueError):
    pass


class SessionOrderViolation(ZqError, RuntimeError):
    pass


class ObservabilityFailure(ZqError, ValueError):
    pass


class ModulusTooSmall(ZqError, OverflowError):
    """A plaintext quantity would wrap around the modulus.

    ``quantity`` names the offending value so the CLI can report it.
    """

    def __init__(self, quantity: str, magnitude: int, q: int):
        self.quantity = quantity
        self.magnitude = magnitude
        self.q = q
        super().__init__(
            f"{quantity}: magnitude {magnitude} does not fit in q/2 = {q // 2} (q = {q})"
        )


class NonFinite(ZqError, FloatingPointError):
    pass


class FormatError(ZqError, ValueError):
    pass


class ConfigError(ZqError, ValueError):
    pass
