"""Exception types raised across the package."""


class NMWLError(Exception):
    """Base class for all errors raised by nmwl."""


class OutOfSupport(NMWLError, ValueError):
    pass


class InvalidParameter(NMWLError, ValueError):
    pass


class NumericalFailure(NMWLError, ArithmeticError):
    pass


class DivergentExpectation(NMWLError, ArithmeticError):
    pass


class DegenerateVariance(NMWLError, ValueError):
    pass


class InvalidArity(NMWLError, ValueError):
    pass


class InvalidWeights(NMWLError, ValueError):
    """A weight row violates one of the weight constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid weight row: " + ", ".join(self.violations))


class DimensionMismatch(NMWLError, ValueError):
    pass


class WrongFamily(NMWLError, TypeError):
    pass


class OptimizerFailure(NMWLError, ArithmeticError):
    pass


class DivergentComplexity(NMWLError, ArithmeticError):
    """The normalizing integral of a maximized likelihood does not converge."""

    def __init__(self, message, side=None):
        self.side = side
        super().__init__(message if side is None else f"{side}: {message}")


class EqualWeightViolation(NMWLError, ValueError):
    pass


class ConfigError(NMWLError, ValueError):
    pass


class DegenerateFit(UserWarning):
    """Mixture fit of the MLE baseline landed on p = 0 or p = 1."""
