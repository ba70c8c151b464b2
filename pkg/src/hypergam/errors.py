"""Exception hierarchy for hypergam."""


class HypergamError(Exception):
    """Base class for all hypergam errors."""


class DegenerateCovariate(HypergamError):
    """Covariate has too few distinct values to support a spline basis."""


class KnotCollision(HypergamError):
    """Quantile knots collapse onto each other or onto the boundary."""


class BasisMismatch(HypergamError):
    """Grid basis was built with different knots/degree than the training basis."""


class RankDeficientBasis(HypergamError):
    """Orthogonalized basis lost full column rank."""


class OutOfRangeDof(HypergamError):
    """Requested degrees of freedom outside the open interval (1, K+1)."""


class NumericalFailure(HypergamError):
    """A matrix that must be positive definite failed to factorize."""


class CollinearDesign(HypergamError):
    """Linear design columns are (numerically) collinear."""


class SeparationOrDegenerate(HypergamError):
    """GLM null fit is degenerate (e.g. all-equal binary responses)."""


class IwlsDiverged(HypergamError):
    """Penalized IWLS did not converge within the iteration cap."""


class SpaceTooLarge(HypergamError):
    """Model space exceeds the enumeration cap."""


class ConfigError(HypergamError):
    """Invalid run configuration."""


class DataError(HypergamError):
    """Input data cannot be used (missing columns, non-numeric values, ...)."""
