import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from hypergam.bases import DesignBlock, RawCovariate, build_osullivan_basis, orthogonalize_block
from hypergam.dof import (
    CalibrationSpectrum,
    DofGrid,
    default_grid,
    dof_derivative,
    dof_from_rho,
    rho_from_dof,
    spectrum,
)
from hypergam.errors import OutOfRangeDof, RankDeficientBasis


def synthetic_block(Z, weights=None):
    n = Z.shape[0]
    return DesignBlock(
        name="syn", x=np.zeros(n), Z=Z, basis=None,
        center_x=0.0, center_Z=np.zeros(Z.shape[1]), slope_Z=np.zeros(Z.shape[1]),
        weights=weights,
    )


def test_orthonormal_columns_give_unit_eigenvalues():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((30, 4)))
    spec = spectrum(synthetic_block(Q))
    np.testing.assert_allclose(spec.eigenvalues, np.ones(4), atol=1e-12)


def test_gaussian_case_is_plain_gram():
    rng = np.random.default_rng(1)
    Z = rng.standard_normal((25, 3))
    spec = spectrum(synthetic_block(Z))
    expected = np.linalg.eigvalsh(Z.T @ Z)
    np.testing.assert_allclose(spec.eigenvalues, expected, rtol=1e-12)


def test_spectrum_matches_dense_eigensolver_oracle():
    rng = np.random.default_rng(2)
    Z = rng.standard_normal((40, 5))
    w = rng.uniform(0.2, 2.0, size=40)
    spec = spectrum(synthetic_block(Z, weights=w))
    oracle = scipy.linalg.eigvalsh(Z.T @ np.diag(w) @ Z)
    np.testing.assert_allclose(spec.eigenvalues, oracle, rtol=1e-10)


def test_rank_deficiency_detected():
    rng = np.random.default_rng(3)
    Z = rng.standard_normal((20, 4))
    Z[:, 3] = Z[:, 0]
    with pytest.raises(RankDeficientBasis):
        spectrum(synthetic_block(Z))


def test_single_eigenvalue_half_shrinkage():
    spec = CalibrationSpectrum(eigenvalues=np.array([1.0]))
    assert dof_from_rho(spec, 1.0) == pytest.approx(1.5)


def test_limits_of_dof_map():
    spec = CalibrationSpectrum(eigenvalues=np.array([0.5, 1.0, 4.0]))
    assert dof_from_rho(spec, 1e-14) == pytest.approx(1.0, abs=1e-9)
    assert dof_from_rho(spec, 1e14) == pytest.approx(4.0, abs=1e-9)


def test_roundtrip_over_grid():
    rng = np.random.default_rng(4)
    lam = rng.uniform(0.01, 5.0, size=6)
    spec = CalibrationSpectrum(eigenvalues=np.sort(lam))
    for d in [1.5, 2.0, 3.0, 4.0, 5.0, 6.0]:
        rho = rho_from_dof(spec, d)
        assert dof_from_rho(spec, rho) == pytest.approx(d, abs=1e-8)


def test_single_eigenvalue_inversion():
    spec = CalibrationSpectrum(eigenvalues=np.array([1.0]))
    assert rho_from_dof(spec, 1.5) == pytest.approx(1.0, abs=1e-8)


def test_inversion_matches_bisection_oracle():
    rng = np.random.default_rng(5)
    lam = np.sort(rng.uniform(1e-4, 2.0, size=5))
    spec = CalibrationSpectrum(eigenvalues=lam)
    target = 2.7
    lo, hi = 1e-12, 1e12
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        if dof_from_rho(spec, mid) < target:
            lo = mid
        else:
            hi = mid
    oracle = np.sqrt(lo * hi)
    assert rho_from_dof(spec, target) == pytest.approx(oracle, rel=1e-6)
    assert dof_from_rho(spec, rho_from_dof(spec, target)) == pytest.approx(target, abs=1e-8)


def test_out_of_range_dof():
    spec = CalibrationSpectrum(eigenvalues=np.array([1.0, 2.0]))
    for bad in (0.5, 1.0, 3.0, 5.0):
        with pytest.raises(OutOfRangeDof):
            rho_from_dof(spec, bad)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    r1=st.floats(-6.0, 6.0),
    r2=st.floats(-6.0, 6.0),
)
def test_monotonicity(seed, r1, r2):
    rng = np.random.default_rng(seed)
    lam = np.sort(rng.uniform(1e-3, 10.0, size=4))
    spec = CalibrationSpectrum(eigenvalues=lam)
    lo, hi = sorted((10.0**r1, 10.0**r2))
    if lo < hi:
        assert dof_from_rho(spec, lo) < dof_from_rho(spec, hi)


def test_derivative_matches_finite_differences():
    rng = np.random.default_rng(6)
    lam = np.sort(rng.uniform(0.01, 3.0, size=5))
    spec = CalibrationSpectrum(eigenvalues=lam)
    for logr in np.linspace(-4, 4, 15):
        rho = 10.0**logr
        h = rho * 1e-6
        fd = (dof_from_rho(spec, rho + h) - dof_from_rho(spec, rho - h)) / (2 * h)
        assert dof_derivative(spec, rho) == pytest.approx(fd, rel=1e-5)


def test_glm_calibration_is_model_independent(pima_workspace):
    # the rho tables come from the fixed null-model weights; scoring two
    # different non-null models must leave them untouched
    ws = pima_workspace
    before = [dict(t) for t in ws.rho_table]
    ws.log_marglik((1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0))
    ws.log_marglik((0.0, 1.0, 0.0, 0.0, 0.0, 3.0, 2.0))
    after = [dict(t) for t in ws.rho_table]
    assert before == after
    # and they equal a fresh recomputation from the block spectra
    for j in range(ws.p):
        for d, rho in before[j].items():
            assert rho_from_dof(ws.spectra[j], d) == pytest.approx(rho, rel=1e-10)


def test_grid_validation():
    with pytest.raises(ValueError):
        DofGrid(np.array([0.0, 0.5, 1.0]))
    with pytest.raises(ValueError):
        DofGrid(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        DofGrid(np.array([0.0, 2.0, 1.0]))
    g = default_grid(6)
    np.testing.assert_array_equal(g.values, np.arange(7.0))
    assert g.n_nonzero == 6
