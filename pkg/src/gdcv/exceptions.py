"""Exception types shared across the package."""


class GdcvError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(GdcvError, ValueError):
    """Array shapes are incompatible."""


class NonFiniteInput(GdcvError, ValueError):
    """Input contains NaN or infinite entries."""


class ConvergenceFailure(GdcvError, RuntimeError):
    """A matrix decomposition backend failed to converge."""


class DenominatorDegenerate(GdcvError, ArithmeticError):
    """A degrees-of-freedom denominator is numerically zero (near-interpolation)."""


class SingularSystem(GdcvError, ArithmeticError):
    """Linear system is singular (e.g. ridgeless fit on rank-deficient data)."""


class PowerOverflow(GdcvError, OverflowError):
    """Gram-power coefficients overflowed; the step schedule is divergent."""


class QuadratureFailure(GdcvError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""


class ModelMismatch(GdcvError, ValueError):
    """Operation requires a different simulation-model class."""


class InvalidConfig(GdcvError, ValueError):
    """Simulation or experiment configuration is invalid."""


class EmptyInput(GdcvError, ValueError):
    """An operation received an empty sample."""


class MemoryBudgetExceeded(GdcvError, MemoryError):
    """Requested coefficient history would exceed the configured memory ceiling."""
