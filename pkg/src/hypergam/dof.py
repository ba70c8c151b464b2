"""Degrees-of-freedom calibration for the spline variance factor.

The prior variance factor ``rho`` of a smooth term maps one-to-one to its
effective degrees of freedom

    d(rho) = 1 + sum_k  lambda_k / (lambda_k + 1/rho),

where ``lambda_k`` are the positive eigenvalues of ``Z' W Z`` for the
orthogonalized basis (``W = I`` in the Gaussian case, the fixed null-model
weights otherwise). The "+1" counts the always-present linear column, so
``d`` ranges over (1, K+1). The map is strictly increasing and is inverted
numerically.
"""

from dataclasses import dataclass

import numpy as np

from .bases import DesignBlock
from .errors import OutOfRangeDof, RankDeficientBasis

__all__ = [
    "CalibrationSpectrum",
    "DofGrid",
    "default_grid",
    "spectrum",
    "dof_from_rho",
    "dof_derivative",
    "rho_from_dof",
]


@dataclass(frozen=True)
class CalibrationSpectrum:
    """Positive eigenvalues of the (weighted) basis gram matrix."""

    eigenvalues: np.ndarray
    covariate: str = "x"

    @property
    def n_basis(self) -> int:
        return self.eigenvalues.size


@dataclass(frozen=True)
class DofGrid:
    """Finite set of admissible degrees of freedom, always containing 0 and 1."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("dof grid needs at least the values 0 and 1")
        if np.any(np.diff(v) <= 0):
            raise ValueError("dof grid must be strictly increasing")
        if v[0] != 0.0 or 1.0 not in v:
            raise ValueError("dof grid must contain 0 and 1")
        if np.any((v > 0) & (v < 1)):
            raise ValueError("nonzero dof values must be >= 1")

    @property
    def n_nonzero(self) -> int:
        return self.values.size - 1

    def index_of(self, value: float) -> int:
        idx = int(np.searchsorted(self.values, value))
        if idx >= self.values.size or self.values[idx] != value:
            raise ValueError(f"{value} is not a grid value")
        return idx


def default_grid(n_basis: int) -> DofGrid:
    """The grid {0, 1, ..., K} for a K-column basis."""
    return DofGrid(np.arange(n_basis + 1, dtype=float))


def spectrum(block: DesignBlock) -> CalibrationSpectrum:
    Z = block.Z
    if block.weights is None:
        gram = Z.T @ Z
    else:
        gram = Z.T @ (block.weights[:, None] * Z)
    gram = (gram + gram.T) / 2.0
    lam = np.linalg.eigvalsh(gram)
    if lam[0] <= 1e-12 * lam[-1]:
        raise RankDeficientBasis(
            f"{block.name}: basis gram matrix is numerically rank deficient"
        )
    return CalibrationSpectrum(eigenvalues=lam, covariate=block.name)


def dof_from_rho(spec: CalibrationSpectrum, rho: float) -> float:
    if rho <= 0:
        raise ValueError("rho must be positive")
    lam = spec.eigenvalues
    return 1.0 + float(np.sum(lam / (lam + 1.0 / rho)))


def dof_derivative(spec: CalibrationSpectrum, rho: float) -> float:
    """d d(rho)/d rho = sum_k lambda_k / (rho*lambda_k + 1)^2 > 0."""
    lam = spec.eigenvalues
    return float(np.sum(lam / (rho * lam + 1.0) ** 2))


def rho_from_dof(spec: CalibrationSpectrum, d: float, tol: float = 1e-10) -> float:
    """Invert the dof map by safeguarded Newton on log rho."""
    K = spec.n_basis
    if not (1.0 < d < K + 1.0):
        raise OutOfRangeDof(f"dof must lie in (1, {K + 1}), got {d}")
    lam = spec.eigenvalues
    s = d - 1.0
    # single-eigenvalue solutions bracket the mixed-spectrum root
    lo = s / ((K - s) * lam[-1])
    hi = s / ((K - s) * lam[0])
    while dof_from_rho(spec, lo) > d:
        lo /= 10.0
    while dof_from_rho(spec, hi) < d:
        hi *= 10.0
    t_lo, t_hi = np.log(lo), np.log(hi)
    t = (t_lo + t_hi) / 2.0
    for _ in range(100):
        rho = np.exp(t)
        f = dof_from_rho(spec, rho) - d
        if abs(f) < tol:
            break
        if f > 0:
            t_hi = t
        else:
            t_lo = t
        df = dof_derivative(spec, rho) * rho  # derivative in t = log rho
        t_new = t - f / df
        if not (t_lo < t_new < t_hi):
            t_new = (t_lo + t_hi) / 2.0
        t = t_new
    return float(np.exp(t))
