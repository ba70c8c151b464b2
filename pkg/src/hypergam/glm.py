"""Generalised g-prior and integrated Laplace marginal likelihood for GLMs.

The linear coefficients get a Gaussian prior with precision ``g^{-1} J0``
where ``J0`` is the information of the linear coefficients in the working
normal model at the a-priori linear predictor ``eta0 = 0``, with the spline
effects integrated out:

    J0 = X' W0^{1/2} (I + W0^{1/2} Z D Z' W0^{1/2})^{-1} W0^{1/2} X.

``J0`` is computed through the same low-rank identity as the Gaussian path;
it reduces to ``X' W0 X`` when the model has no spline effects.

For a fixed g, the marginal likelihood f(y | g, d) is approximated by a
Laplace approximation at the posterior mode of all regression coefficients
(found by penalized IWLS); f(y | d) then follows by Gauss-Hermite quadrature
on log g against the hyper-g or hyper-g/n prior density.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._scalaropt import bracket_maximize
from .errors import IwlsDiverged, NumericalFailure
from .families import Family
from .gaussian import AssembledModel
from .specfun import SpecialValue  # noqa: F401  (re-exported convenience)

__all__ = [
    "GeneralizedGPrior",
    "IwlsResult",
    "generalized_g_prior",
    "bayesian_iwls",
    "log_g_prior_density",
    "GlmModelContext",
    "log_marglik_glm_null",
    "log_marglik_glm",
]


@dataclass(frozen=True)
class GeneralizedGPrior:
    """Prior precision matrix for the linear coefficients (up to 1/g)."""

    J0: np.ndarray
    chol: np.ndarray
    log_det: float


def generalized_g_prior(am: AssembledModel, w0) -> GeneralizedGPrior:
    """Information-based prior precision from the weighted working model.

    ``w0`` is the diagonal of the working weight matrix at the linear
    predictor expected a priori. Requires design blocks orthogonalized with
    weights proportional to ``w0`` so the intercept stays decoupled.
    """
    w0 = np.asarray(w0, dtype=float)
    X = am.X
    if X.shape[1] == 0:
        raise ValueError("model has no linear coefficients")
    Xw = X * w0[:, None]
    J0 = X.T @ Xw
    if am.n_spline > 0:
        Zw = am.Z * np.sqrt(w0)[:, None]
        M = Zw.T @ Zw + np.diag(am.dinv)
        L, ok = _kernels.chol_flag(np.ascontiguousarray(M))
        if not ok:
            raise NumericalFailure("weighted spline gram + D^{-1} not positive definite")
        C = _kernels.solve_lower(L, np.ascontiguousarray(Zw.T @ (np.sqrt(w0)[:, None] * X)))
        J0 = J0 - C.T @ C
    J0 = (J0 + J0.T) / 2.0
    LJ, ok = _kernels.chol_flag(np.ascontiguousarray(J0))
    if not ok:
        raise NumericalFailure("generalized g-prior precision not positive definite")
    return GeneralizedGPrior(
        J0=J0, chol=LJ, log_det=2.0 * float(np.sum(np.log(np.diag(LJ))))
    )


@dataclass(frozen=True)
class IwlsResult:
    """Mode and curvature of the penalized GLM fit."""

    mode: np.ndarray
    chol_info: np.ndarray   # Cholesky factor of Xa' W Xa + P at the mode
    loglik: float           # log-likelihood at the mode (full constants)
    n_iter: int


def bayesian_iwls(
    Xa, y, prior_precision, family: Family, beta_init=None, max_iter=50, tol=1e-8
) -> IwlsResult:
    """Penalized IWLS to the posterior mode for fixed prior precision."""
    Xa = np.ascontiguousarray(Xa, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    P = np.ascontiguousarray(prior_precision, dtype=float)
    if beta_init is None:
        beta_init = np.zeros(Xa.shape[1])
    beta, L, ll, it, status = _kernels.iwls_fit(
        Xa, y, P, np.ascontiguousarray(beta_init, dtype=float),
        family.family_id, max_iter, tol,
    )
    if status != 0:
        raise IwlsDiverged(
            f"IWLS {'hit iteration cap' if status == 1 else 'failed numerically'} "
            f"after {it} iterations"
        )
    return IwlsResult(
        mode=beta, chol_info=L, loglik=ll + family.loglik_const(y), n_iter=it
    )


def log_g_prior_density(prior: str, g: float, n: int) -> float:
    """Log density of the mixing prior on g (uniform-on-shrinkage forms)."""
    if prior == "hyper-g":
        return -2.0 * math.log1p(g)
    if prior == "hyper-g/n":
        return -math.log(n) - 2.0 * math.log1p(g / n)
    raise ValueError(f"unknown prior '{prior}'")


class GlmModelContext:
    """Per-model state reused across g values: design, prior blocks, caches."""

    def __init__(self, am: AssembledModel, y, family: Family, gp: GeneralizedGPrior | None):
        n = y.size
        self.y = np.ascontiguousarray(y, dtype=float)
        self.family = family
        self.n_linear = am.n_linear
        self.n_spline = am.n_spline
        self.Xa = np.ascontiguousarray(
            np.column_stack([np.ones(n), am.X, am.Z])
        )
        self.dim = 1 + am.n_linear + am.n_spline
        self.gp = gp
        self.dinv = am.dinv
        # prior pieces that do not depend on g
        self.log_det_dinv = float(np.sum(np.log(am.dinv))) if am.n_spline else 0.0
        self._P = np.zeros((self.dim, self.dim))
        if am.n_spline:
            sl = slice(1 + am.n_linear, self.dim)
            self._P[sl, sl] = np.diag(am.dinv)
        self._warm = np.zeros(self.dim)
        self.ll_const = family.loglik_const(self.y)

    def prior_precision(self, g: float) -> np.ndarray:
        P = self._P.copy()
        if self.n_linear:
            sl = slice(1, 1 + self.n_linear)
            P[sl, sl] = self.gp.J0 / g
        return P

    def log_laplace_given_g(self, g: float) -> float:
        """Laplace approximation of log f(y | g, d) at the coefficient mode."""
        P = self.prior_precision(g)
        beta, L, ll, it, status = _kernels.iwls_fit(
            self.Xa, self.y, np.ascontiguousarray(P), self._warm,
            self.family.family_id, 50, 1e-8,
        )
        if status != 0:
            # a stale warm start can stall the iteration; retry cold
            beta, L, ll, it, status = _kernels.iwls_fit(
                self.Xa, self.y, np.ascontiguousarray(P), np.zeros(self.dim),
                self.family.family_id, 50, 1e-8,
            )
        if status != 0:
            raise IwlsDiverged(f"IWLS failed at g={g:.3g} (status {status})")
        self._warm = beta
        half_log_det_info = float(np.sum(np.log(np.diag(L))))
        val = ll + self.ll_const + 0.5 * math.log(2.0 * math.pi) - half_log_det_info
        if self.n_linear:
            bd = beta[1 : 1 + self.n_linear]
            quad = float(bd @ self.gp.J0 @ bd)
            val += (
                -0.5 * self.n_linear * math.log(g)
                + 0.5 * self.gp.log_det
                - 0.5 * quad / g
            )
        if self.n_spline:
            u = beta[1 + self.n_linear :]
            val += 0.5 * self.log_det_dinv - 0.5 * float(u @ (self.dinv * u))
        return val


def log_marglik_glm_null(y, family: Family) -> float:
    """Laplace-approximated marginal likelihood of the intercept-only model."""
    y = np.ascontiguousarray(y, dtype=float)
    Xa = np.ones((y.size, 1))
    res = bayesian_iwls(Xa, y, np.zeros((1, 1)), family)
    return (
        res.loglik
        + 0.5 * math.log(2.0 * math.pi)
        - float(np.log(res.chol_info[0, 0]))
    )


def log_marglik_glm(
    am: AssembledModel,
    y,
    family: Family,
    gp: GeneralizedGPrior | None,
    prior: str,
    n_nodes: int = 20,
) -> float:
    """Integrated Laplace approximation of log f(y | d) for a GLM.

    The Laplace approximation over the coefficients is evaluated on
    Gauss-Hermite nodes in t = log g centered at the integrand mode, scaled
    by the curvature there; the null model needs no integration.
    """
    if am.n_linear == 0 and am.n_spline == 0:
        return log_marglik_glm_null(y, family)
    n = y.size
    ctx = GlmModelContext(am, y, family, gp)

    def phi(t):
        g = math.exp(t)
        return ctx.log_laplace_given_g(g) + log_g_prior_density(prior, g, n) + t

    t_star, phi_star = bracket_maximize(phi, math.log(n), step=2.0, xtol=0.05)
    h = 0.5
    d2 = (phi(t_star + h) - 2.0 * phi(t_star) + phi(t_star - h)) / (h * h)
    sigma = 1.0 / math.sqrt(-d2) if d2 < 0 else 1.0
    log_terms = _gauss_hermite_log_terms(phi, ctx, t_star, sigma, n_nodes)
    m = float(np.max(log_terms))
    return m + math.log(float(np.sum(np.exp(log_terms - m)))) + 0.5 * math.log(2.0) + math.log(sigma)


def _gauss_hermite_log_terms(phi, ctx: GlmModelContext, t_star, sigma, n_nodes):
    """Evaluate the GH sum terms walking outward from the mode on each side.

    Nodes are visited in adjacency order per side so the IWLS warm start
    inside ``ctx`` always moves a short distance in log g.
    """
    nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
    log_terms = np.empty(n_nodes)
    warm_mode = ctx._warm.copy()
    right = [i for i in range(n_nodes) if nodes[i] >= 0]
    left = [i for i in range(n_nodes) if nodes[i] < 0]
    for idx in sorted(right, key=lambda i: nodes[i]):
        t = t_star + math.sqrt(2.0) * sigma * nodes[idx]
        log_terms[idx] = phi(t) + nodes[idx] ** 2 + math.log(weights[idx])
    ctx._warm = warm_mode
    for idx in sorted(left, key=lambda i: -nodes[i]):
        t = t_star + math.sqrt(2.0) * sigma * nodes[idx]
        log_terms[idx] = phi(t) + nodes[idx] ** 2 + math.log(weights[idx])
    return log_terms
