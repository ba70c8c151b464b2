"""Analysis workspace: per-covariate setup, caches, and model scoring.

A :class:`Workspace` prepares orthogonalized design blocks, calibration
spectra and the dof-to-rho tables once, then scores models through
per-covariate gram tables so that a Gaussian model evaluation costs
O((JK)^3) independent of the sample size. GLM models are scored by the
integrated Laplace approximation. Scored marginal likelihoods are memoized
by model index; the stochastic search revisits models heavily.
"""

import math
import os
import pickle
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import _kernels
from .bases import (
    RawCovariate,
    build_osullivan_basis,
    evaluate_basis,
    grid_for_block,
    orthogonalize_block,
    orthogonalize_grid,
)
from .dof import DofGrid, default_grid, rho_from_dof, spectrum
from .errors import CollinearDesign, ConfigError, IwlsDiverged, NumericalFailure
from .families import Family, fit_null, make_family
from .gaussian import (
    PRIORS,
    assemble,
    gaussian_const,
    log_bayes_factor,
)
from .glm import (
    GeneralizedGPrior,
    log_marglik_glm,
    log_marglik_glm_null,
)
from .modelspace import (
    ModelScore,
    enumerate_models,
    inclusion_summary,
    log_model_prior,
    n_included,
    n_smooth,
    normalize_scores,
)
from ._scalaropt import bracket_maximize

__all__ = ["Workspace"]


class _GramTable:
    """Pairwise (weighted) inner products of all design columns."""

    def __init__(self, blocks, weights=None, y=None):
        p = len(blocks)
        w = weights
        xs = [b.x for b in blocks]
        zs = [b.Z for b in blocks]

        def wv(v):
            return v if w is None else w * v

        self.xtx = np.empty((p, p))
        for i in range(p):
            for j in range(i, p):
                self.xtx[i, j] = self.xtx[j, i] = xs[i] @ wv(xs[j])
        self.zz = {}
        self.zx = {}
        for i in range(p):
            wzi = zs[i].T if w is None else zs[i].T * w
            for j in range(p):
                self.zz[(i, j)] = wzi @ zs[j] if j >= i else self.zz[(j, i)].T
                self.zx[(i, j)] = wzi @ xs[j]
        if y is not None:
            yc = y - np.average(y, weights=w)
            self.sst0 = float(yc @ wv(yc))
            self.xty = np.array([x @ wv(yc) for x in xs])
            self.zty = [z.T @ wv(yc) for z in zs]
        self.sizes = [b.n_basis for b in blocks]

    def select(self, lin_idx, sm_idx, dinv_blocks, with_response=False):
        """Assemble the per-model arrays consumed by the scoring kernel."""
        q = sum(self.sizes[j] for j in sm_idx)
        i_n = len(lin_idx)
        M = np.zeros((q, q))
        ZtX = np.zeros((q, i_n))
        Zty = np.zeros(q)
        off = {}
        pos = 0
        for j in sm_idx:
            off[j] = pos
            pos += self.sizes[j]
        for a_i, a in enumerate(sm_idx):
            ra = slice(off[a], off[a] + self.sizes[a])
            for b in sm_idx:
                M[ra, off[b] : off[b] + self.sizes[b]] = self.zz[(a, b)]
            M[ra, ra] += np.diag(dinv_blocks[a_i])
            for c_i, c in enumerate(lin_idx):
                ZtX[ra, c_i] = self.zx[(a, c)]
            if with_response:
                Zty[ra] = self.zty[a]
        XtX = self.xtx[np.ix_(lin_idx, lin_idx)]
        Xty = self.xty[list(lin_idx)] if with_response else np.zeros(i_n)
        return (
            np.ascontiguousarray(M),
            np.ascontiguousarray(ZtX),
            np.ascontiguousarray(Zty),
            np.ascontiguousarray(XtX),
            np.ascontiguousarray(Xty),
        )


class Workspace:
    """Shared state for scoring, searching and sampling one data set.

    Parameters
    ----------
    x : array (n, p)
        Covariate matrix (continuous covariates only).
    y : array (n,)
        Response vector.
    family : str
        "gaussian" (default), "bernoulli-logit" or "poisson-log".
    prior : str
        "hyper-g/n" (default) or "hyper-g".
    n_inner_knots : int
        Inner knots per covariate spline basis (K = knots + 2 columns).
    grid : DofGrid, optional
        Defaults to {0, 1, ..., K}.
    g_prior_weights : str
        Weight matrix for the generalised g-prior: "eta0" (IWLS weights at
        the zero linear predictor, the value expected a priori) or
        "null-fit" (weights at the null-model intercept).
    """

    def __init__(
        self,
        x,
        y,
        *,
        family="gaussian",
        prior="hyper-g/n",
        n_inner_knots=4,
        grid=None,
        names=None,
        g_prior_weights="eta0",
        boundary_margin=None,
        gh_nodes=20,
        seed_entropy=0,
    ):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.ndim != 2:
            raise ConfigError("x must be a 2-d array")
        self.y = np.ascontiguousarray(y, dtype=float)
        self.n, self.p = x.shape
        if self.y.size != self.n:
            raise ConfigError("x and y have different lengths")
        if prior not in PRIORS:
            raise ConfigError(f"prior must be one of {PRIORS}")
        self.prior = prior
        self.gh_nodes = gh_nodes
        self.seed_entropy = seed_entropy
        self.names = list(names) if names is not None else [f"x{j+1}" for j in range(self.p)]
        if len(self.names) != self.p:
            raise ConfigError("names length does not match number of covariates")

        self.family: Family | None = None if family == "gaussian" else make_family(family)
        if self.family is not None:
            self.family.validate_response(self.y)
            self.null_fit = fit_null(self.y, self.family)
            w_center = self.null_fit.weights
            if g_prior_weights == "eta0":
                self.w_prior = self.family.weights(np.zeros(self.n))
            elif g_prior_weights == "null-fit":
                self.w_prior = w_center.copy()
            else:
                raise ConfigError("g_prior_weights must be 'eta0' or 'null-fit'")
        else:
            self.null_fit = None
            w_center = None
            self.w_prior = None

        covs = [RawCovariate(x[:, j], self.names[j]) for j in range(self.p)]
        basis_kwargs = {} if boundary_margin is None else {"boundary_margin": boundary_margin}
        bases = [build_osullivan_basis(c, n_inner_knots, **basis_kwargs) for c in covs]
        self.blocks = [
            orthogonalize_block(c, b, w_center) for c, b in zip(covs, bases)
        ]
        self.spectra = [spectrum(b) for b in self.blocks]

        k_min = min(b.n_basis for b in self.blocks)
        self.grid = grid if grid is not None else default_grid(k_min)
        if self.grid.values[-1] >= k_min + 1:
            raise ConfigError(
                f"grid maximum {self.grid.values[-1]} must be below K+1 = {k_min + 1}"
            )

        self.rho_table = [
            {float(d): rho_from_dof(self.spectra[j], float(d)) for d in self.grid.values if d > 1}
            for j in range(self.p)
        ]

        if self.family is None:
            self._gram = _GramTable(self.blocks, weights=None, y=self.y)
            self._gram0 = None
        else:
            self._gram = None
            self._gram0 = _GramTable(self.blocks, weights=self.w_prior)
            self._null_lml = log_marglik_glm_null(self.y, self.family)

        self._memo: dict[tuple, float] = {}
        self.n_failed_models = 0
        self.failed_models: set[tuple] = set()

    # -- plumbing -----------------------------------------------------------

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_memo"] = {}
        state["failed_models"] = set()
        return state

    def rho(self, j: int, d: float) -> float:
        """Variance factor for covariate j at dof d (cached on the grid)."""
        table = self.rho_table[j]
        d = float(d)
        if d in table:
            return table[d]
        return rho_from_dof(self.spectra[j], d)

    def _split(self, model):
        lin = tuple(j for j, d in enumerate(model) if d >= 1)
        sm = tuple(j for j, d in enumerate(model) if d > 1)
        return lin, sm

    def _dinv_blocks(self, model, sm_idx, rhos=None):
        if rhos is None:
            rhos = [self.rho(j, model[j]) for j in sm_idx]
        return [np.full(self.blocks[j].n_basis, 1.0 / r) for j, r in zip(sm_idx, rhos)]

    # -- scoring ------------------------------------------------------------

    def log_prior(self, model) -> float:
        return log_model_prior(model, self.p, self.grid)

    def log_marglik(self, model) -> float:
        key = tuple(float(d) for d in model)
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        if self.family is None:
            val = self._score_gaussian(key)
        else:
            try:
                val = self._score_glm(key)
            except IwlsDiverged as exc:
                warnings.warn(f"model {key} failed to score: {exc}", stacklevel=2)
                self.n_failed_models += 1
                self.failed_models.add(key)
                val = -math.inf
        self._memo[key] = val
        return val

    def score_components(self, model):
        return self.log_marglik(model), self.log_prior(model)

    def log_posterior_kernel(self, model) -> float:
        lml, lpr = self.score_components(model)
        return lml + lpr

    def _score_gaussian(self, model, rhos=None, force_laplace=False) -> float:
        lin, sm = self._split(model)
        dinv_blocks = self._dinv_blocks(model, sm, rhos)
        M, ZtX, Zty, XtX, Xty = self._gram.select(lin, sm, dinv_blocks, with_response=True)
        sum_log_dinv = float(sum(np.sum(np.log(db)) for db in dinv_blocks))
        sst, ssm, log_det_half, status = _kernels.gaussian_score(
            M, ZtX, Zty, XtX, Xty, self._gram.sst0, sum_log_dinv
        )
        if status == 1:
            raise NumericalFailure("spline gram + D^{-1} not positive definite")
        if status == 2:
            raise CollinearDesign("linear design block is collinear")
        r2 = ssm / sst if sst > 0 else 0.0
        return (
            gaussian_const(self.n)
            - (self.n - 1) / 2.0 * math.log(sst)
            + log_bayes_factor(self.prior, self.n, len(lin), r2, force_laplace)
            + log_det_half
        )

    def _g_prior_from_grams(self, lin, sm, dinv_blocks) -> GeneralizedGPrior:
        M0, ZtX0, _, XtX0, _ = self._gram0.select(lin, sm, dinv_blocks)
        J0 = XtX0
        if M0.shape[0] > 0:
            L0, ok = _kernels.chol_flag(M0)
            if not ok:
                raise NumericalFailure("weighted spline gram + D^{-1} not positive definite")
            C0 = _kernels.solve_lower(L0, ZtX0)
            J0 = XtX0 - C0.T @ C0
        J0 = np.ascontiguousarray((J0 + J0.T) / 2.0)
        LJ, ok = _kernels.chol_flag(J0)
        if not ok:
            raise NumericalFailure("generalized g-prior precision not positive definite")
        return GeneralizedGPrior(
            J0=J0, chol=LJ, log_det=2.0 * float(np.sum(np.log(np.diag(LJ))))
        )

    def _score_glm(self, model, rhos=None) -> float:
        lin, sm = self._split(model)
        if not lin:
            return self._null_lml
        rho_list = [self.rho(j, model[j]) for j in sm] if rhos is None else list(rhos)
        dinv_blocks = self._dinv_blocks(model, sm, rho_list)
        gp = self._g_prior_from_grams(lin, sm, dinv_blocks)
        am = assemble(model, self.blocks, rho_list)
        return log_marglik_glm(am, self.y, self.family, gp, self.prior, self.gh_nodes)

    def log_marglik_continuous(self, dvec, force_laplace=False) -> float:
        """Score a model with continuous degrees of freedom (not memoized)."""
        dvec = tuple(float(d) for d in dvec)
        for j, d in enumerate(dvec):
            if d != 0.0 and not (1.0 <= d < self.blocks[j].n_basis + 1):
                raise ConfigError(f"dof {d} out of range for covariate {j}")
        _, sm = self._split(dvec)
        rhos = [self.rho(j, dvec[j]) for j in sm]
        if self.family is None:
            return self._score_gaussian(dvec, rhos=rhos, force_laplace=force_laplace)
        return self._score_glm(dvec, rhos=rhos)

    # -- whole-space and search APIs ----------------------------------------

    def score_all(self, models=None, cap=10**6, threads=None) -> list[ModelScore]:
        """Score a model list (default: the full space) and normalize."""
        if models is None:
            models = list(enumerate_models(self.p, self.grid, cap))
        else:
            models = [tuple(float(d) for d in m) for m in models]
        if threads is None:
            threads = int(os.environ.get("HYPERGAM_THREADS", "1"))
        todo = [m for m in models if m not in self._memo]
        if threads > 1 and len(todo) > 64:
            payload = pickle.dumps(self)
            chunk = max(32, len(todo) // (8 * threads))
            chunks = [todo[i : i + chunk] for i in range(0, len(todo), chunk)]
            with ProcessPoolExecutor(
                max_workers=threads, initializer=_init_worker, initargs=(payload,)
            ) as ex:
                for part in ex.map(_score_chunk, chunks):
                    self._memo.update(part)
        scores = [
            ModelScore(
                model=m,
                log_marglik=self.log_marglik(m),
                log_prior=self.log_prior(m),
            )
            for m in models
        ]
        return normalize_scores(scores)

    def search(self, iters, seed, start="null", p_move=0.75):
        from .search import mh_search

        if start == "null":
            start_model = tuple(0.0 for _ in range(self.p))
        elif start == "full":
            start_model = tuple(float(self.grid.values[-1]) for _ in range(self.p))
        else:
            start_model = tuple(float(d) for d in start)
        return mh_search(self.score_components, start_model, iters, self.grid, seed, p_move)

    def scores_from_search(self, state) -> list[ModelScore]:
        scores = [
            ModelScore(
                model=m,
                log_marglik=lml,
                log_prior=lpr,
                visit_count=state.visit_counts.get(m, 0),
            )
            for m, (lml, lpr) in state.score_cache.items()
            if math.isfinite(lml)
        ]
        return normalize_scores(scores)

    def inclusion_table(self, scores) -> np.ndarray:
        return inclusion_summary(scores)

    # -- prediction ----------------------------------------------------------

    def prediction_grids(self, n_star: int = 100):
        """Per-covariate grids over the observed range with their transforms."""
        out = {}
        for j, block in enumerate(self.blocks):
            grid_vals, gb = grid_for_block(block, n_star)
            out[j] = (grid_vals, gb)
        return out


_WORKER_WS: Workspace | None = None


def _init_worker(payload):
    global _WORKER_WS
    _WORKER_WS = pickle.loads(payload)


def _score_chunk(chunk):
    return {m: _WORKER_WS.log_marglik(m) for m in chunk}
