"""Objective Bayesian selection of covariates and their penalised-spline
transformations in (generalised) additive models with hyper-g priors."""

from ._backend import USE_NUMBA, backend_name
from .bases import (
    DesignBlock,
    GridBlock,
    RawBasis,
    RawCovariate,
    build_osullivan_basis,
    evaluate_basis,
    orthogonalize_block,
    orthogonalize_grid,
)
from .dof import CalibrationSpectrum, DofGrid, default_grid, dof_from_rho, rho_from_dof, spectrum
from .engine import Workspace
from .families import bernoulli_logit, fit_null, gaussian_unit, make_family, poisson_log
from .gaussian import (
    PRIORS,
    assemble,
    log_bayes_factor,
    log_marglik_gaussian,
    low_rank_precision,
    sufficient_stats,
)
from .glm import bayesian_iwls, generalized_g_prior, log_marglik_glm
from .modelspace import (
    ModelScore,
    enumerate_models,
    inclusion_summary,
    log_model_prior,
    normalize_scores,
)
from .postprocess import MetaModel, aggregate_meta, median_probability_pattern, optimize_dof
from .sampler import PosteriorDraws, credible_bands, curves, sample_gaussian, sample_glm
from .search import SearchState, mh_search, posterior_tables, propose
from .simulate import Scenario, generate
from .specfun import SpecialValue, appell_f1, gauss_2f1

__version__ = "0.1.0"
