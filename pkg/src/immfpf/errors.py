"""Exception hierarchy shared across the package."""


class ImmFpfError(Exception):
    """Base class for all package errors."""


class ValidationError(ImmFpfError):
    """An input value violates a documented invariant."""


class ParseError(ImmFpfError):
    """A configuration file could not be parsed; names the offending section/key."""


class NegativeOffDiagonal(ValidationError):
    """A transition-rate matrix has a negative off-diagonal entry."""


class RowSumNonzero(ValidationError):
    """A transition-rate matrix row does not sum to zero within tolerance."""


class StepTooLarge(ValidationError):
    """A time step is too large for the first-order jump probabilities to be valid."""


class NonFiniteState(ImmFpfError):
    """A particle state became NaN/inf, usually a sign the step size is too large."""


class StabilityViolation(ImmFpfError):
    """Grid solver step violates its explicit-scheme stability bounds."""


class MassEscape(ImmFpfError):
    """Grid solver boundary cells hold a non-negligible fraction of probability mass."""


class BoundaryResidualLarge(ImmFpfError):
    """Cumulative-integral BVP solution has a non-vanishing right-boundary residual."""


class SegmentShorterThanBurnIn(ImmFpfError):
    """A constant-mode segment is shorter than the requested burn-in window."""
