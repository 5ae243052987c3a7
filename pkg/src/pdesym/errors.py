"""Shared exception types."""


class PdesymError(Exception):
    """Base class for all package-specific errors."""


class ParseError(PdesymError):
    """Malformed infix input; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownSymbol(ParseError):
    """Identifier outside the published grammar."""


class UnsupportedNode(PdesymError):
    """Expression node not representable in the requested dialect or operation."""


class DecodeError(PdesymError):
    """Token sequence cannot be decoded back into an equation."""


class DivisionByZero(PdesymError):
    """Exact constant folding hit a zero divisor."""


class CFLViolation(PdesymError):
    """Requested time step exceeds the stability bound."""


class NonFiniteState(PdesymError):
    """Numerical state contains NaN or infinity."""


class ZeroCoefficient(PdesymError):
    """A relative initialization interval degenerates at zero."""


class AllWeightsDegenerate(PdesymError):
    """Every particle simulation failed; no usable importance weights."""


class DegenerateReference(PdesymError):
    """A metric's reference quantity (norm or variance) vanishes."""


class NotSolvable(PdesymError):
    """Equation lies outside the conservation-law families the solver handles."""
