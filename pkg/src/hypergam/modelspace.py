"""Model indexing, multiplicity-corrected model prior and posterior summaries.

A model is a tuple of per-covariate degrees of freedom drawn from a
:class:`~hypergam.dof.DofGrid`: ``d_j = 0`` excludes covariate j, ``d_j = 1``
includes it linearly, ``d_j > 1`` smoothly. The prior places a uniform
distribution on the number of included covariates, then uniform choices of
the covariate subset and of the nonzero grid values:

    1 / f(d) = (p + 1) * C(p, I) * K^I,

with ``I`` the number of included covariates and ``K`` the number of nonzero
grid values. This yields marginal prior inclusion probabilities of exactly
one half for every covariate.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dof import DofGrid
from .errors import SpaceTooLarge

__all__ = [
    "Model",
    "ModelScore",
    "n_included",
    "n_smooth",
    "log_model_prior",
    "enumerate_models",
    "normalize_scores",
    "inclusion_summary",
]

# a model index is a plain tuple of grid values, usable as a dict key
Model = tuple


def n_included(model) -> int:
    """Number of covariates entering at least linearly (I)."""
    return sum(1 for d in model if d >= 1)


def n_smooth(model) -> int:
    """Number of smoothly modelled covariates (J)."""
    return sum(1 for d in model if d > 1)


@dataclass
class ModelScore:
    model: Model
    log_marglik: float
    log_prior: float
    post_prob: float = 0.0
    visit_count: int = 0

    @property
    def log_posterior_kernel(self) -> float:
        return self.log_marglik + self.log_prior


def log_model_prior(model, p: int, grid: DofGrid) -> float:
    if len(model) != p:
        raise ValueError("model length does not match p")
    i = n_included(model)
    k = grid.n_nonzero
    return -(
        math.log(p + 1)
        + math.lgamma(p + 1)
        - math.lgamma(i + 1)
        - math.lgamma(p - i + 1)
        + i * math.log(k)
    )


def enumerate_models(p: int, grid: DofGrid, cap: int = 10**6):
    """Yield every model in the grid^p space exactly once."""
    total = len(grid.values) ** p
    if total > cap:
        raise SpaceTooLarge(f"model space has {total} > {cap} models")
    vals = [float(v) for v in grid.values]
    return itertools.product(vals, repeat=p)


def normalize_scores(scores: list[ModelScore]) -> list[ModelScore]:
    """Fill post_prob by renormalizing the posterior kernel over the set."""
    if not scores:
        return scores
    kernels = np.array([s.log_posterior_kernel for s in scores])
    finite = np.isfinite(kernels)
    if not finite.any():
        raise ValueError("no finite posterior kernels to normalize")
    m = kernels[finite].max()
    w = np.where(finite, np.exp(kernels - m), 0.0)
    w /= w.sum()
    for s, pw in zip(scores, w):
        s.post_prob = float(pw)
    return scores


def inclusion_summary(scores: list[ModelScore]) -> np.ndarray:
    """Per-covariate posterior probabilities of exclusion / linear / smooth.

    Returns a (p, 3) array with columns P(d_j = 0), P(d_j = 1), P(d_j > 1);
    rows sum to one.
    """
    if not scores:
        raise ValueError("need at least one scored model")
    p = len(scores[0].model)
    table = np.zeros((p, 3))
    for s in scores:
        for j, d in enumerate(s.model):
            if d == 0:
                table[j, 0] += s.post_prob
            elif d == 1:
                table[j, 1] += s.post_prob
            else:
                table[j, 2] += s.post_prob
    return table
