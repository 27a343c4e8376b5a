"""Exception types shared across the package."""


class DimlabError(Exception):
    """Base class for all package errors."""


class MapValidationError(DimlabError):
    """A branch or map violates its structural invariants."""


class OutOfDomain(DimlabError):
    """A point lies in no branch domain (it fell into a gap)."""


class NoConvergence(DimlabError):
    """An inverse-branch solve did not reach the requested accuracy."""


class NotUnique(DimlabError):
    """Sign analysis found more than one fixed point in a branch."""


class BudgetExceeded(DimlabError):
    """A requested enumeration is larger than the configured budget."""


class OrbitEscaped(DimlabError):
    """A forward orbit left the union of branch domains.

    The step index at which the orbit escaped is stored in ``step``.
    """

    def __init__(self, step, point=None):
        super().__init__(f"orbit escaped the branch domains at step {step}")
        self.step = step
        self.point = point


class EmptySelection(DimlabError):
    """No cylinder passed the good-cylinder filter."""


class NoBracket(DimlabError):
    """The pressure rate at s=0 is not positive; no root can be bracketed."""


class Infeasible(DimlabError):
    """No optimizer restart produced a point satisfying the constraints."""


class Degenerate(DimlabError):
    """The map has no parabolic fixed point, so the construction is empty."""


class MalformedScheme(DimlabError):
    """A Moran scheme violates nesting, disjointness or measure consistency."""


class HarvestFailed(DimlabError):
    """Block harvesting could not reach the requested retained mass."""


class PadSymbolInvalid(DimlabError):
    """The padding branch does not contain the intended parabolic point."""


class TooFewPoints(DimlabError):
    """Not enough sample points for a meaningful box-count regression."""
