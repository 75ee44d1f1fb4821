"""Exception hierarchy shared by the engine and the CLI."""

from __future__ import annotations


class ChronicleError(Exception):
    """Base class for every error raised by the engine."""


class DimensionMismatch(ChronicleError, ValueError):
    pass


class NonFiniteValue(ChronicleError, ValueError):
    pass


class UnknownFactor(ChronicleError, KeyError):
    pass


class InvalidDecomposition(ChronicleError, ValueError):
    """Raised when candidate projectors do not form a decomposition of the identity.

    ``violations`` lists every failed condition, each a tuple whose first item is
    one of ``"NotProjector"``, ``"NotMutuallyOrthogonal"``, ``"SumNotIdentity"``
    or ``"DuplicateLabel"``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(" ".join(str(x) for x in v) for v in self.violations)
        super().__init__(f"invalid decomposition: {lines}")

    @property
    def kinds(self) -> set[str]:
        return {v[0] for v in self.violations}


class IncompatibleFrameworks(ChronicleError, ValueError):
    pass


class InconsistentFamily(ChronicleError, ValueError):
    def __init__(self, worst_pair, worst_overlap):
        self.worst_pair = worst_pair
        self.worst_overlap = worst_overlap
        super().__init__(
            f"family violates the consistency condition: |<a|b>| = {worst_overlap:.3e} "
            f"for a={worst_pair[0]} b={worst_pair[1]}"
        )


class ConditionOnNullEvent(ChronicleError, ZeroDivisionError):
    pass


class NullProjection(ChronicleError, ZeroDivisionError):
    pass


class CompletionFailure(ChronicleError, ArithmeticError):
    pass


class SpecInconsistent(ChronicleError, ValueError):
    pass


class GridMismatch(ChronicleError, ValueError):
    pass


class ParseError(ChronicleError):
    """Malformed scenario text; ``location`` is ``"line L, column C"`` or a field path."""

    def __init__(self, message: str, location: str):
        self.location = location
        super().__init__(f"{location}: {message}")


class ValidationError(ChronicleError):
    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)
