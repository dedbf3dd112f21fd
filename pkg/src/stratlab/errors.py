"""Exception hierarchy shared by all stratlab modules."""


class StratLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidOperands(StratLabError, ValueError):
    """Operands disagree on field or ambient dimension."""


class DimensionMismatch(InvalidOperands):
    """Operation is undefined for subspaces of unequal dimension."""


class NotContained(StratLabError):
    """A containment precondition failed."""


class ChartMismatch(StratLabError):
    """A map sends sampled chart points outside the target chart."""


class DomainEscape(StratLabError):
    """Evaluation was requested outside a map's domain."""


class NotOnStratum(StratLabError):
    """A point expected on a stratum is not on it."""


class Inconclusive(StratLabError):
    """A numerical decision could not be made reliably."""


class SingularPoint(Inconclusive):
    """Rank of a defining Jacobian is undecidable at this point."""


class NotAFault(StratLabError):
    """Supplied data does not describe a condition-(a) fault."""


class InfeasibleH(StratLabError):
    """No subspace H fits between the required bounds."""


class DimensionHypothesisViolated(StratLabError):
    """Source dimension is too small for the witness construction."""


class AlignmentFailure(StratLabError):
    """Aligned bases failed to converge to the reference basis."""


class ConstructionContradiction(StratLabError):
    """A witness member turned out transverse where it must not be."""


class NonComplexSubspace(StratLabError):
    """A real subspace of R^{2p} is not invariant under multiplication by i."""


class SamplingFailure(StratLabError):
    """Could not scale a random perturbation into the neighbourhood."""


class ProbePreconditionError(StratLabError):
    """The base map is not transverse on the compact set."""
