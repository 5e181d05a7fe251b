"""Exception types raised across the package."""


class BplError(Exception):
    """Base class for all package errors."""


class DomainError(BplError, ValueError):
    """Argument outside the supported range of an operation."""


class SingularMode(BplError):
    """A modal 2x2 boundary system is numerically singular."""

    def __init__(self, n, detail=""):
        self.n = n
        super().__init__(f"singular mode system at n={n}" + (f": {detail}" if detail else ""))


class NoConvergence(BplError):
    """Modal series tail bound not met within the maximal truncation."""


class DegenerateNodes(BplError):
    """Vandermonde nodes coincide (or nearly so)."""


class DegenerateTau(BplError):
    """Phase shift lies on the excluded lattice; the conjugate-pair system is singular."""


class DirectionTooClose(BplError):
    """Observation direction is excluded for the active formula (x = d or x.d = 0)."""


class NoRootInWindow(BplError):
    """Argument matching found no admissible radius inside the search window."""


class IllConditioned(BplError):
    """The regularized normal equations could not be solved numerically."""


class StageError(BplError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
