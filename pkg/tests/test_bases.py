import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypergam.bases import (
    GridBlock,
    RawCovariate,
    build_osullivan_basis,
    evaluate_basis,
    orthogonalize_block,
    orthogonalize_grid,
)
from hypergam.errors import BasisMismatch, DegenerateCovariate


def wdot(a, b, w):
    return math.fsum((np.asarray(a) * np.asarray(b) * np.asarray(w)).tolist())


def test_basis_dimension_six_knots():
    rng = np.random.default_rng(0)
    cov = RawCovariate(rng.standard_normal(200), "x")
    assert build_osullivan_basis(cov, 6).n_columns == 8


def test_basis_dimension_four_knots():
    rng = np.random.default_rng(1)
    cov = RawCovariate(rng.standard_normal(100), "x")
    assert build_osullivan_basis(cov, 4).n_columns == 6


def test_constant_covariate_rejected():
    with pytest.raises(DegenerateCovariate):
        RawCovariate(np.ones(50), "const")


def test_too_few_distinct_values_rejected():
    cov = RawCovariate(np.array([0.0, 1.0, 2.0] * 20), "ties")
    with pytest.raises(DegenerateCovariate):
        build_osullivan_basis(cov, 4)


def test_centered_covariate_unchanged():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(60)
    x -= x.mean()
    cov = RawCovariate(x, "x")
    block = orthogonalize_block(cov, build_osullivan_basis(cov, 3))
    np.testing.assert_allclose(block.x, x, atol=1e-14)
    assert block.center_x == pytest.approx(0.0, abs=1e-16)


def test_unweighted_orthogonality_forced():
    rng = np.random.default_rng(3)
    n = 75
    cov = RawCovariate(rng.gamma(2.0, size=n) * 10 + 3, "x")
    block = orthogonalize_block(cov, build_osullivan_basis(cov, 4))
    tol = 1e-10 * n
    assert abs(block.x.sum()) <= tol
    assert np.abs(block.Z.sum(axis=0)).max() <= tol
    assert np.abs(block.x @ block.Z).max() <= tol


def test_weighted_orthogonality_random_block():
    # direct verification of the three weighted inner products
    rng = np.random.default_rng(4)
    n = 50
    cov = RawCovariate(rng.standard_normal(n) * 4 + 100, "x")
    basis = build_osullivan_basis(cov, 4)
    w = rng.uniform(0.1, 3.0, size=n)
    block = orthogonalize_block(cov, basis, weights=w)
    ones = np.ones(n)
    tol = 1e-10 * n
    assert abs(wdot(ones, block.x, w)) <= tol
    for k in range(block.Z.shape[1]):
        assert abs(wdot(ones, block.Z[:, k], w)) <= tol
        assert abs(wdot(block.x, block.Z[:, k], w)) <= tol


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n=st.integers(30, 120),
    weighted=st.booleans(),
)
def test_orthogonality_property(seed, n, weighted):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) * rng.uniform(0.1, 50) + rng.uniform(-100, 100)
    cov = RawCovariate(x, "x")
    basis = build_osullivan_basis(cov, 3)
    w = rng.uniform(0.05, 5.0, size=n) if weighted else None
    block = orthogonalize_block(cov, basis, weights=w)
    wv = w if w is not None else np.ones(n)
    ones = np.ones(n)
    tol = 1e-10 * n
    assert abs(wdot(ones, block.x, wv)) <= tol
    assert max(abs(wdot(ones, block.Z[:, k], wv)) for k in range(block.Z.shape[1])) <= tol
    assert max(abs(wdot(block.x, block.Z[:, k], wv)) for k in range(block.Z.shape[1])) <= tol


def test_grid_equals_training_reproduces_block():
    rng = np.random.default_rng(5)
    cov = RawCovariate(rng.standard_normal(40), "x")
    basis = build_osullivan_basis(cov, 3)
    block = orthogonalize_block(cov, basis)
    gb = orthogonalize_grid(cov.values, basis, block)
    np.testing.assert_allclose(gb.x_star, block.x, atol=1e-12)
    np.testing.assert_allclose(gb.Z_star, block.Z, atol=1e-12)


def test_grid_point_at_training_mean_centers_to_zero():
    rng = np.random.default_rng(6)
    cov = RawCovariate(rng.standard_normal(40) + 7.0, "x")
    basis = build_osullivan_basis(cov, 3)
    block = orthogonalize_block(cov, basis)
    gb = orthogonalize_grid(np.array([block.center_x]), evaluate_basis(basis, [block.center_x]), block)
    assert gb.x_star[0] == pytest.approx(0.0, abs=1e-12)


def test_grid_three_points_hand_computed():
    # hand evaluation of the two-term projection with stored training sums
    rng = np.random.default_rng(7)
    cov = RawCovariate(rng.standard_normal(30) * 2 + 1, "x")
    basis = build_osullivan_basis(cov, 2)
    block = orthogonalize_block(cov, basis)
    grid = np.array([-1.0, 0.5, 2.5])
    grid_basis = evaluate_basis(basis, grid)
    gb = orthogonalize_grid(grid, grid_basis, block)

    n = cov.values.size
    c1 = cov.values.sum() / n
    x_star = grid - c1
    zt = basis.matrix
    c2 = zt.sum(axis=0) / n
    c3 = (block.x @ zt) / (block.x @ block.x)
    expected = grid_basis.matrix - np.outer(np.ones(3), c2) - np.outer(x_star, c3)
    np.testing.assert_allclose(gb.x_star, x_star, atol=1e-12)
    np.testing.assert_allclose(gb.Z_star, expected, atol=1e-12)


def test_grid_rejects_mismatched_knots():
    rng = np.random.default_rng(8)
    cov = RawCovariate(rng.standard_normal(50), "x")
    basis3 = build_osullivan_basis(cov, 3)
    basis4 = build_osullivan_basis(cov, 4)
    block = orthogonalize_block(cov, basis3)
    with pytest.raises(BasisMismatch):
        orthogonalize_grid(np.linspace(-1, 1, 5), evaluate_basis(basis4, np.linspace(-1, 1, 5)), block)


def test_dimension_invariant_under_affine_rescaling():
    rng = np.random.default_rng(9)
    x = rng.standard_normal(80)
    b1 = build_osullivan_basis(RawCovariate(x, "x"), 4)
    b2 = build_osullivan_basis(RawCovariate(3.5 * x + 11.0, "x"), 4)
    assert b1.n_columns == b2.n_columns
    np.testing.assert_allclose(3.5 * b1.knots + 11.0, b2.knots, rtol=1e-12)


def test_grid_block_dataclass_shape():
    gb = GridBlock(x_star=np.zeros(3), Z_star=np.zeros((3, 4)))
    assert gb.Z_star.shape == (3, 4)
