"""Exception hierarchy for higgslab.

All errors raised by the library derive from :class:`HiggsLabError` so that
callers (notably the CLI) can map failure classes to exit codes.
"""


class HiggsLabError(Exception):
    """Base class for all higgslab errors."""


class ConditioningError(HiggsLabError):
    """A Gram matrix or linear system is too ill-conditioned to trust."""


class ClusteringError(HiggsLabError):
    """Eigenvalue clustering is ambiguous at the working tolerance.

    Carries the two gaps that straddle the clustering threshold so the
    caller can see how close the call was.
    """

    def __init__(self, msg, inner_gap=None, outer_gap=None):
        super().__init__(msg)
        self.inner_gap = inner_gap
        self.outer_gap = outer_gap


class ContractViolationError(HiggsLabError):
    """An input violates a documented precondition (e.g. non-idempotent projection)."""


class DomainError(HiggsLabError):
    """A point or path leaves the computational domain."""


class NotCertifiableError(HiggsLabError):
    """The field cannot be certified: a critical point meets the unit disk."""


class DegenerateFamilyError(HiggsLabError):
    """The branch-collision polynomial vanished identically (should not occur)."""


class PathTooCoarseError(HiggsLabError):
    """Eigenvalue matching between consecutive path samples is ambiguous."""


class NonCriticalPathError(HiggsLabError):
    """The path fails the non-criticality condition required downstream."""


class NonConvergenceError(HiggsLabError):
    """Newton stagnated; carries the last solve report."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class OracleError(HiggsLabError):
    """The radial shooting oracle failed to bracket a solution."""


class InternalInconsistencyError(HiggsLabError):
    """Two independent computations of the same quantity disagree."""


class InsufficientDataError(HiggsLabError):
    """Too few uncensored points to fit a decay law."""


class ConfigError(HiggsLabError):
    """Experiment configuration is missing, malformed, or fails its schema."""
