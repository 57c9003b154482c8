"""Exception hierarchy shared by every pch module."""

from __future__ import annotations


class PchError(Exception):
    """Base class for all errors raised by pch."""


class ValidationError(PchError):
    """A formula is not well formed for the given signature.

    ``node`` is the offending AST node and ``span`` its source location,
    when the formula came from text.
    """

    def __init__(self, message: str, node=None):
        self.node = node
        self.span = getattr(node, "span", None)
        if self.span is not None:
            message = f"{message} (line {self.span.line}, column {self.span.column})"
        super().__init__(message)


class UnboundDummy(ValidationError):
    pass


class InconsistentIntervention(ValidationError):
    pass


class NonPropositionalCondition(ValidationError):
    pass


class UnknownVariable(ValidationError):
    pass


class NestedIntervention(ValidationError):
    pass


class ValueOutOfRange(ValidationError):
    pass


class NameClash(ValidationError):
    """A dummy or generated name collides with a declared variable."""


class ParseError(PchError):
    def __init__(self, message: str, span=None, expected=()):
        self.span = span
        self.expected = tuple(sorted(set(expected)))
        where = ""
        if span is not None:
            where = f"{span.line}:{span.column}: "
        extra = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{where}{message}{extra}")


class ModelError(PchError):
    """A structural causal model violates one of its invariants."""


class WeightSumNotOne(ModelError):
    def __init__(self, total):
        self.total = total
        super().__init__(f"exogenous weights sum to {total}, not 1")


class NonRecursiveMechanism(ModelError):
    pass


class IncompleteTable(ModelError):
    pass


class DuplicateAssignment(ModelError):
    pass


class FragmentError(PchError):
    """The input lies outside the fragment an operation accepts."""


class DomainError(PchError):
    """The domain size is not supported by an operation (e.g. c != 2)."""


class ArityError(PchError):
    pass


class CapExceeded(PchError):
    """An enumeration or size cap was hit; callers usually degrade to Unknown."""

    def __init__(self, cap_name: str, limit):
        self.cap_name = cap_name
        self.limit = limit
        super().__init__(f"{cap_name} cap of {limit} exceeded")


class SourceFormatError(PchError):
    """A reduction source file (DIMACS, QDIMACS, EPR) is malformed."""
