"""Marginal likelihood of Gaussian additive models under hyper-g priors.

With the spline coefficients integrated out, a model is a general linear
model with covariance ``sigma^2 V``, ``V = I + Z D Z'``. All quantities are
computed through the low-rank identity

    V^{-1} = I - W W',    W = Z chol(Z'Z + D^{-1})^{-T},

so no n-by-n matrix is ever factorized. The marginal likelihood on the
original response scale is

    log f(y | d) = const(n) - (n-1)/2 log SST_d + log BF(n, I, R2_d)
                   + log |V_d^{1/2}|^{-1},

where ``const(n)`` is the standard improper-prior constant (flat intercept,
Jeffreys variance), SST/R2 are the generalised sums of squares, and BF is the
prior-dependent Bayes-factor term against the I = 0, R2 = 0 baseline:

* hyper-g (uniform prior on g/(1+g)):
      BF = 2/(I+2) * 2F1((n-1)/2, 1; (I+4)/2; R2)
* hyper-g/n (uniform prior on (g/n)/(1+g/n)):
      BF = n^(-I/2) (1-R2)^(-(n-1)/2) * 2/(I+2) *
           F1(I/2+1; (I+1-n)/2, (n-1)/2; I/2+2; (n-1)/n, (n-(1-R2)^{-1})/n)

For n > 100, or when a special-function evaluation fails, a one-dimensional
Laplace approximation over log g replaces the closed form.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .bases import DesignBlock
from .errors import CollinearDesign, NumericalFailure
from .modelspace import n_included, n_smooth
from .specfun import appell_f1, gauss_2f1

__all__ = [
    "PRIORS",
    "AssembledModel",
    "LowRankPrecision",
    "SufficientStats",
    "assemble",
    "low_rank_precision",
    "sufficient_stats",
    "gaussian_const",
    "log_bayes_factor",
    "log_bayes_factor_laplace",
    "log_marglik_gaussian",
]

PRIORS = ("hyper-g", "hyper-g/n")
LAPLACE_N_THRESHOLD = 100


@dataclass(frozen=True)
class AssembledModel:
    """Stacked design matrices of one model, in ascending covariate order."""

    model: tuple
    X: np.ndarray          # (n, I) centered linear columns, d_j >= 1
    Z: np.ndarray          # (n, sum K_j) spline columns, d_j > 1
    dinv: np.ndarray       # 1/rho_j repeated over each smooth block
    linear_idx: tuple      # covariate indices of X columns
    smooth_idx: tuple      # covariate indices of Z blocks
    smooth_sizes: tuple    # K_j per smooth block

    @property
    def n_linear(self) -> int:
        return self.X.shape[1]

    @property
    def n_spline(self) -> int:
        return self.Z.shape[1]


@dataclass(frozen=True)
class LowRankPrecision:
    """Low-rank representation V^{-1} = I - W W' and half log-determinant."""

    W: np.ndarray
    log_det_half: float    # log |V^{1/2}|^{-1}
    M_chol: np.ndarray     # Cholesky factor of Z'Z + D^{-1}


@dataclass(frozen=True)
class SufficientStats:
    sst: float
    ssm: float
    n: int
    n_linear: int

    @property
    def r2(self) -> float:
        return self.ssm / self.sst if self.sst > 0 else 0.0


def assemble(model, blocks: list[DesignBlock], rhos) -> AssembledModel:
    """Stack per-covariate blocks for one model.

    ``rhos`` holds the variance factors of the smooth covariates in ascending
    covariate order (one value per d_j > 1).
    """
    n = blocks[0].x.size
    linear_idx = tuple(j for j, d in enumerate(model) if d >= 1)
    smooth_idx = tuple(j for j, d in enumerate(model) if d > 1)
    rhos = np.asarray(rhos, dtype=float)
    if rhos.size != len(smooth_idx):
        raise ValueError("need one rho per smooth covariate")
    X = (
        np.column_stack([blocks[j].x for j in linear_idx])
        if linear_idx
        else np.empty((n, 0))
    )
    if smooth_idx:
        Z = np.column_stack([blocks[j].Z for j in smooth_idx])
        sizes = tuple(blocks[j].n_basis for j in smooth_idx)
        dinv = np.concatenate(
            [np.full(k, 1.0 / r) for k, r in zip(sizes, rhos)]
        )
    else:
        Z = np.empty((n, 0))
        sizes = ()
        dinv = np.empty(0)
    return AssembledModel(
        model=tuple(model),
        X=np.ascontiguousarray(X),
        Z=np.ascontiguousarray(Z),
        dinv=dinv,
        linear_idx=linear_idx,
        smooth_idx=smooth_idx,
        smooth_sizes=sizes,
    )


def low_rank_precision(am: AssembledModel) -> LowRankPrecision:
    q = am.n_spline
    if q == 0:
        return LowRankPrecision(
            W=np.empty((am.X.shape[0], 0)), log_det_half=0.0, M_chol=np.empty((0, 0))
        )
    M = am.Z.T @ am.Z + np.diag(am.dinv)
    L, ok = _kernels.chol_flag(np.ascontiguousarray(M))
    if not ok:
        raise NumericalFailure("spline gram + D^{-1} is not positive definite")
    # |V| = |M| |D| and W = Z M^{-T/2}
    log_det_v = 2.0 * float(np.sum(np.log(np.diag(L)))) - float(
        np.sum(np.log(am.dinv))
    )
    W = _kernels.solve_lower(L, np.ascontiguousarray(am.Z.T)).T
    return LowRankPrecision(W=W, log_det_half=-0.5 * log_det_v, M_chol=L)


def sufficient_stats(y, am: AssembledModel, lrp: LowRankPrecision) -> SufficientStats:
    y = np.asarray(y, dtype=float)
    n = y.size
    yc = y - y.mean()
    sst = float(yc @ yc)
    if am.n_spline > 0:
        wy = lrp.W.T @ yc
        sst -= float(wy @ wy)
    if am.n_linear == 0:
        return SufficientStats(sst=sst, ssm=0.0, n=n, n_linear=0)
    X = am.X
    A = X.T @ X
    bx = X.T @ yc
    if am.n_spline > 0:
        WX = lrp.W.T @ X
        A -= WX.T @ WX
        bx -= WX.T @ wy
    LA, ok = _kernels.chol_flag(np.ascontiguousarray(A))
    if not ok:
        raise CollinearDesign("X' V^{-1} X is not positive definite")
    v = _kernels.solve_lower(LA, np.ascontiguousarray(bx.reshape(-1, 1)))[:, 0]
    return SufficientStats(sst=sst, ssm=float(v @ v), n=n, n_linear=am.n_linear)


def gaussian_const(n: int) -> float:
    """Normalizing constant shared by all models for one data set."""
    return math.lgamma((n - 1) / 2.0) - (n - 1) / 2.0 * math.log(math.pi) - 0.5 * math.log(n)


def _log_bf_exact(prior: str, n: int, i: int, r2: float):
    """Closed-form log Bayes factor term; returns (value, converged)."""
    if i == 0:
        return 0.0, True
    if prior == "hyper-g":
        sv = gauss_2f1((n - 1) / 2.0, 1.0, (i + 4) / 2.0, r2)
        if not sv.converged:
            return np.nan, False
        return math.log(2.0 / (i + 2)) + sv.log_abs, True
    sv = appell_f1(
        i / 2.0 + 1.0,
        (i + 1.0 - n) / 2.0,
        (n - 1.0) / 2.0,
        i / 2.0 + 2.0,
        (n - 1.0) / n,
        (n - 1.0 / (1.0 - r2)) / n,
    )
    if not sv.converged:
        return np.nan, False
    return (
        -i / 2.0 * math.log(n)
        - (n - 1) / 2.0 * math.log1p(-r2)
        + math.log(2.0 / (i + 2))
        + sv.log_abs,
        True,
    )


def _shrinkage_logpost_parts(prior, n, i, r2):
    """Return phi, dphi, d2phi of the g-integrand on the t = log g scale."""
    c1 = (n - 1.0 - i) / 2.0
    c2 = (n - 1.0) / 2.0
    k = 1.0 - r2

    if prior == "hyper-g":
        def logprior(g):
            return -2.0 * math.log1p(g)

        def dlogprior(g):
            return -2.0 / (1.0 + g)

        def d2logprior(g):
            return 2.0 / (1.0 + g) ** 2
    else:
        def logprior(g):
            return -math.log(n) - 2.0 * math.log1p(g / n)

        def dlogprior(g):
            return -2.0 / (n + g)

        def d2logprior(g):
            return 2.0 / (n + g) ** 2

    def phi(t):
        g = math.exp(t)
        return c1 * math.log1p(g) - c2 * math.log1p(g * k) + logprior(g) + t

    def dphi(t):
        g = math.exp(t)
        fp = c1 / (1.0 + g) - c2 * k / (1.0 + g * k) + dlogprior(g)
        return g * fp + 1.0

    def d2phi(t):
        g = math.exp(t)
        fp = c1 / (1.0 + g) - c2 * k / (1.0 + g * k) + dlogprior(g)
        fpp = -c1 / (1.0 + g) ** 2 + c2 * k * k / (1.0 + g * k) ** 2 + d2logprior(g)
        return g * fp + g * g * fpp

    return phi, dphi, d2phi


def log_bayes_factor_laplace(prior: str, n: int, i: int, r2: float) -> float:
    """Laplace approximation over log g of the Bayes-factor integral."""
    if i == 0:
        return 0.0
    phi, dphi, d2phi = _shrinkage_logpost_parts(prior, n, i, r2)
    t_lo = -40.0
    t_hi = 5.0
    while dphi(t_hi) > 0 and t_hi < 400.0:
        t_hi += 5.0
    t_star = brentq(dphi, t_lo, t_hi, xtol=1e-10)
    curv = d2phi(t_star)
    if curv >= 0:
        raise NumericalFailure("g-integrand is not concave at its mode")
    return phi(t_star) + 0.5 * math.log(2.0 * math.pi / -curv)


def log_bayes_factor(prior: str, n: int, i: int, r2: float, force_laplace: bool = False) -> float:
    """Model-vs-baseline Bayes-factor term, exact or Laplace per sample size."""
    if prior not in PRIORS:
        raise ValueError(f"prior must be one of {PRIORS}")
    if i > 0 and not (0.0 <= r2 < 1.0):
        raise ValueError("coefficient of determination must be in [0, 1)")
    if force_laplace or n > LAPLACE_N_THRESHOLD:
        return log_bayes_factor_laplace(prior, n, i, r2)
    val, ok = _log_bf_exact(prior, n, i, r2)
    if not ok:
        return log_bayes_factor_laplace(prior, n, i, r2)
    return val


def log_marglik_gaussian(y, model, prior, blocks, rho_cache, force_laplace=False) -> float:
    """Log marginal likelihood for one Gaussian additive model.

    ``rho_cache`` is a callable ``(covariate_index, dof) -> rho`` for the
    smooth terms of the model.
    """
    if n_smooth(model) > 0:
        rhos = [rho_cache(j, d) for j, d in enumerate(model) if d > 1]
    else:
        rhos = []
    am = assemble(model, blocks, rhos)
    lrp = low_rank_precision(am)
    stats = sufficient_stats(y, am, lrp)
    n = stats.n
    return (
        gaussian_const(n)
        - (n - 1) / 2.0 * math.log(stats.sst)
        + log_bayes_factor(prior, n, n_included(model), stats.r2, force_laplace)
        + lrp.log_det_half
    )
