"""Exception types shared across the package."""


class SepShiftError(Exception):
    """Base class for all package errors."""


class ParseError(SepShiftError):
    def __init__(self, message, line=1, column=1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnknownReference(SepShiftError):
    """A name refers to a vertex or edge that was never declared."""


class SinkOrSource(SepShiftError):
    """A digraph has a vertex with no outgoing or no incoming edge."""


class HorizonExceeded(SepShiftError):
    """An operation needs layers beyond the stored horizon."""


class CRViolated(SepShiftError):
    """A contraction sequence breaks the parity condition."""


class NoCompletion(SepShiftError):
    """A romb could not be closed."""


class AmbiguousCompletion(SepShiftError):
    """A romb closes in more than one way."""


class NonInjectiveCell(SepShiftError):
    """The shift is not injective on a partition cell."""


class ResourceBudgetExceeded(SepShiftError):
    """A construction would exceed the configured vertex cap."""


class OddDepth(SepShiftError):
    """An operation needs an even-depth prefix."""


class EvenDepth(SepShiftError):
    """An operation needs an odd-depth prefix."""


class NotHDiagram(SepShiftError):
    """The inverse shift was requested on a diagram that is not an h-diagram."""


class InsufficientDepth(SepShiftError):
    """A prefix is too short for the requested radius."""


class StructureMismatch(SepShiftError):
    """A supplied cylinder decomposition does not match the target graph."""


class StageOverflow(SepShiftError):
    """Stage padding would run past the stored horizon."""
