"""Spline bases and orthogonalized per-covariate design blocks.

Each covariate enters the additive model through a centered linear column
``x`` and a spline basis matrix ``Z`` built so that

* ``1' W x = 0``, ``1' W Z = 0`` and ``x' W Z = 0`` (``W = I`` for Gaussian
  responses, the fixed null-model IWLS weights otherwise), and
* a ridge prior ``u ~ N(0, rho * I)`` on the basis coefficients is exactly an
  integrated-squared-second-derivative roughness penalty (cubic O'Sullivan
  construction: eigendecompose the curvature penalty of a cubic B-spline
  basis, drop the two-dimensional null space spanned by constant and linear
  functions, and rescale the remaining directions to unit penalty).

Prediction-grid versions of ``x`` and ``Z`` reuse the training projection
coefficients; they are never re-estimated from the grid.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from ._kernels import kahan_wdot
from .errors import BasisMismatch, DegenerateCovariate, KnotCollision

__all__ = [
    "RawCovariate",
    "RawBasis",
    "DesignBlock",
    "GridBlock",
    "build_osullivan_basis",
    "evaluate_basis",
    "orthogonalize_block",
    "orthogonalize_grid",
]


@dataclass(frozen=True)
class RawCovariate:
    """Observed covariate values on their original scale."""

    values: np.ndarray
    name: str = "x"

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size < 3:
            raise DegenerateCovariate(f"{self.name}: need at least 3 observations")
        if np.unique(v).size < 2:
            raise DegenerateCovariate(f"{self.name}: fewer than 2 distinct values")


@dataclass(frozen=True)
class RawBasis:
    """Uncentered spline basis, re-evaluable at new covariate values.

    ``matrix`` holds the basis evaluated at the training points. ``knots``
    are the inner knots on the covariate scale; ``lo``/``hi`` the boundary
    knots (placed a margin outside the observed range ``data_lo``/
    ``data_hi``). ``transform`` maps B-spline columns to the
    penalty-whitened columns, and together with the stored affine rescaling
    allows evaluating the identical basis on grids.
    """

    matrix: np.ndarray
    knots: np.ndarray
    degree: int
    lo: float = field(repr=False, default=0.0)
    hi: float = field(repr=False, default=1.0)
    data_lo: float = field(repr=False, default=0.0)
    data_hi: float = field(repr=False, default=1.0)
    knot_vector: np.ndarray = field(repr=False, default=None)
    transform: np.ndarray = field(repr=False, default=None)

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class DesignBlock:
    """Orthogonalized design pieces for one covariate.

    ``center_x`` is the weighted mean subtracted from the raw covariate, and
    ``center_Z``/``slope_Z`` are the intercept and linear projection
    coefficients removed from the raw basis; all three are reused verbatim
    when transforming prediction grids.
    """

    name: str
    x: np.ndarray
    Z: np.ndarray
    basis: RawBasis
    center_x: float
    center_Z: np.ndarray
    slope_Z: np.ndarray
    weights: np.ndarray | None = None

    @property
    def n_basis(self) -> int:
        return self.Z.shape[1]


@dataclass(frozen=True)
class GridBlock:
    """Training-consistent transforms of a prediction grid."""

    x_star: np.ndarray
    Z_star: np.ndarray


def _bspline_design(knot_vector, degree, u, nu=0):
    m = len(knot_vector) - degree - 1
    spl = BSpline(knot_vector, np.eye(m), degree, extrapolate=True)
    return spl(u, nu=nu)


DEFAULT_BOUNDARY_MARGIN = 0.15


def build_osullivan_basis(
    cov: RawCovariate,
    n_inner_knots: int,
    degree: int = 3,
    boundary_margin: float = DEFAULT_BOUNDARY_MARGIN,
) -> RawBasis:
    """Cubic O'Sullivan basis with inner knots at equally spaced quantiles.

    ``n_inner_knots`` inner knots produce ``K = n_inner_knots + 2`` columns
    (the curvature penalty of a cubic B-spline basis with m inner knots has
    rank m + 2). Knots sit at type-7 quantiles of the *unique* covariate
    values, the classical penalized-spline default, which keeps knots spread
    out for ties-heavy covariates. Boundary knots are placed
    ``boundary_margin`` times the observed span outside the data range so the
    curvature penalty keeps acting right up to the extremes. Duplicate knots
    are collapsed with a warning, shrinking K accordingly.
    """
    if n_inner_knots < 1:
        raise ValueError("n_inner_knots must be >= 1")
    x = cov.values
    if np.unique(x).size <= n_inner_knots:
        raise DegenerateCovariate(
            f"{cov.name}: needs more than {n_inner_knots} distinct values"
        )
    data_lo, data_hi = float(np.min(x)), float(np.max(x))
    span = data_hi - data_lo
    lo = data_lo - boundary_margin * span
    hi = data_hi + boundary_margin * span
    u = (x - lo) / (hi - lo)
    probs = np.arange(1, n_inner_knots + 1) / (n_inner_knots + 1)
    inner = np.quantile(np.unique(u), probs)
    uniq = np.unique(inner)
    if uniq.size < inner.size:
        warnings.warn(
            f"{cov.name}: {inner.size - uniq.size} duplicate quantile knots "
            "collapsed; basis dimension reduced",
            stacklevel=2,
        )
        inner = uniq
    if inner.size == 0 or np.any(inner <= 0.0) or np.any(inner >= 1.0):
        raise KnotCollision(f"{cov.name}: quantile knots collide with the boundary")

    kv = np.concatenate([np.zeros(degree + 1), inner, np.ones(degree + 1)])
    B = _bspline_design(kv, degree, u)

    # curvature penalty on [0, 1]: exact Gauss-Legendre per knot interval
    breaks = np.concatenate([[0.0], inner, [1.0]])
    gl_x, gl_w = np.polynomial.legendre.leggauss(degree)
    nodes = []
    wts = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        half = (b - a) / 2.0
        nodes.append((a + b) / 2.0 + half * gl_x)
        wts.append(half * gl_w)
    nodes = np.concatenate(nodes)
    wts = np.concatenate(wts)
    D2 = _bspline_design(kv, degree, nodes, nu=2)
    omega = D2.T @ (wts[:, None] * D2)
    omega = (omega + omega.T) / 2.0

    lam, vec = np.linalg.eigh(omega)
    null_dim = 2
    if np.any(lam[null_dim:] <= 1e-9 * lam[-1]):
        raise KnotCollision(f"{cov.name}: penalty null space larger than expected")
    transform = vec[:, null_dim:] / np.sqrt(lam[null_dim:])
    return RawBasis(
        matrix=B @ transform,
        knots=lo + inner * (hi - lo),
        degree=degree,
        lo=lo,
        hi=hi,
        data_lo=data_lo,
        data_hi=data_hi,
        knot_vector=kv,
        transform=transform,
    )


def evaluate_basis(basis: RawBasis, x_new) -> RawBasis:
    """Evaluate the stored basis at new covariate values (same knots)."""
    x_new = np.ascontiguousarray(x_new, dtype=float)
    u = (x_new - basis.lo) / (basis.hi - basis.lo)
    B = _bspline_design(basis.knot_vector, basis.degree, u)
    return RawBasis(
        matrix=B @ basis.transform,
        knots=basis.knots,
        degree=basis.degree,
        lo=basis.lo,
        hi=basis.hi,
        data_lo=basis.data_lo,
        data_hi=basis.data_hi,
        knot_vector=basis.knot_vector,
        transform=basis.transform,
    )


def _wcolumn_means(M, w, denom):
    out = np.empty(M.shape[1])
    ones = np.ones(M.shape[0])
    for k in range(M.shape[1]):
        out[k] = kahan_wdot(np.ascontiguousarray(M[:, k]), ones, w) / denom
    return out


def orthogonalize_block(cov: RawCovariate, basis: RawBasis, weights=None) -> DesignBlock:
    """Center the covariate and project intercept/linear parts out of the basis.

    With weights absent this is the plain Gram-Schmidt sweep against the
    all-ones vector and the centered covariate; with weights it uses the
    corresponding weighted inner products throughout.
    """
    x_raw = cov.values
    n = x_raw.size
    zt = basis.matrix
    if zt.shape[0] != n:
        raise BasisMismatch("basis rows do not match covariate length")
    if weights is None:
        w = np.ones(n)
        stored_w = None
    else:
        w = np.ascontiguousarray(weights, dtype=float)
        if w.shape != (n,) or np.any(w <= 0):
            raise ValueError("weights must be a strictly positive n-vector")
        stored_w = w
    ones = np.ones(n)
    denom0 = kahan_wdot(ones, ones, w)
    center_x = kahan_wdot(x_raw, ones, w) / denom0
    x = x_raw - center_x
    center_Z = _wcolumn_means(zt, w, denom0)
    sxx = kahan_wdot(x, x, w)
    slope_Z = np.empty(zt.shape[1])
    for k in range(zt.shape[1]):
        slope_Z[k] = kahan_wdot(x, np.ascontiguousarray(zt[:, k]), w) / sxx
    Z = zt - np.outer(ones, center_Z) - np.outer(x, slope_Z)
    return DesignBlock(
        name=cov.name,
        x=x,
        Z=np.ascontiguousarray(Z),
        basis=basis,
        center_x=center_x,
        center_Z=center_Z,
        slope_Z=slope_Z,
        weights=stored_w,
    )


def orthogonalize_grid(grid_values, grid_basis: RawBasis, block: DesignBlock) -> GridBlock:
    """Apply the training centering to a prediction grid.

    The projections use the training sums stored on ``block``; the grid
    itself contributes nothing to the centering coefficients.
    """
    if grid_basis.degree != block.basis.degree or not np.array_equal(
        grid_basis.knots, block.basis.knots
    ):
        raise BasisMismatch("grid basis must share knots and degree with training basis")
    grid_values = np.ascontiguousarray(grid_values, dtype=float)
    x_star = grid_values - block.center_x
    Z_star = (
        grid_basis.matrix
        - np.outer(np.ones(grid_values.size), block.center_Z)
        - np.outer(x_star, block.slope_Z)
    )
    return GridBlock(x_star=x_star, Z_star=Z_star)


def grid_for_block(block: DesignBlock, n_star: int = 100) -> tuple[np.ndarray, GridBlock]:
    """Equally spaced grid over the observed range plus its GridBlock."""
    lo, hi = block.basis.data_lo, block.basis.data_hi
    grid = np.linspace(lo, hi, n_star)
    return grid, orthogonalize_grid(grid, evaluate_basis(block.basis, grid), block)
