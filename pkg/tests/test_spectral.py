import numpy as np
import pytest

from src.core.builders import build_bound1, build_rw1, build_rw2, build_torus1
from src.core.errors import DimensionCapError, NumericalError
from src.core.lattice import IncrementSet, assemble_structure_matrix
from src.core.sampling import dense_pinv_oracle
from src.core.spectral import (
    eigendecompose,
    marginal_at_lambda,
    marginal_stddevs,
    model_summary,
    numeric_rank,
    pseudo_inverse_diagonal,
    reference_stddev,
    summarize,
)


def test_rw1_three_node_summary():
    decomp = eigendecompose(build_rw1(3).structure)
    np.testing.assert_allclose(decomp.eigenvalues, [0, 1, 3], atol=1e-12)
    assert numeric_rank(decomp) == 1
    np.testing.assert_allclose(pseudo_inverse_diagonal(decomp, 1), [5 / 9, 2 / 9, 5 / 9], rtol=1e-12)
    summary = summarize(decomp, 1)
    assert summary.sigma_ref == pytest.approx((50 / 729) ** (1 / 6), rel=1e-12)
    assert summary.sigma_ref == pytest.approx(0.640, abs=5e-4)


def test_two_node_single_retained_mode():
    P = assemble_structure_matrix(IncrementSet.from_rows([{0: -1, 1: 1}]), 2)
    decomp = eigendecompose(P)
    np.testing.assert_allclose(decomp.eigenvalues, [0, 2], atol=1e-12)
    np.testing.assert_allclose(pseudo_inverse_diagonal(decomp, 1), [0.25, 0.25], rtol=1e-12)


def test_decomposition_reconstructs_matrix():
    P = build_bound1(6, 6).structure
    decomp = eigendecompose(P)
    np.testing.assert_allclose(decomp.reconstruct(), P.to_dense(), atol=1e-10)
    assert np.all(np.diff(decomp.eigenvalues) >= 0)


@pytest.mark.parametrize("model,expected", [
    (build_rw2(8), 2),
    (build_bound1(7, 7), 3),
    (build_bound1(11, 11), 3),
])
def test_numeric_null_dimension(model, expected):
    assert numeric_rank(eigendecompose(model.structure)) == expected


def test_marginal_stddevs():
    np.testing.assert_allclose(marginal_stddevs([4.0, 9.0]), [2.0, 3.0])
    with pytest.raises(NumericalError):
        marginal_stddevs([1.0, 0.0])
    with pytest.raises(NumericalError):
        marginal_stddevs([1.0, -1e-6])
    np.testing.assert_allclose(marginal_stddevs([1.0, 1e-30]), [1.0, 1e-15])


def test_reference_stddev():
    assert reference_stddev([2.0, 2.0, 2.0]) == pytest.approx(2.0)
    assert reference_stddev([1.0, 4.0]) == pytest.approx(2.0)
    values = np.array([0.3, 1.7, 2.2, 5.0])
    assert reference_stddev(values[::-1]) == pytest.approx(reference_stddev(values), rel=1e-14)
    with pytest.raises(NumericalError):
        reference_stddev([1.0, 0.0])


def test_marginal_at_lambda():
    assert marginal_at_lambda(2.0, 4.0) == pytest.approx(1.0)
    assert marginal_at_lambda(0.83, 1.0) == pytest.approx(0.83)
    with pytest.raises(NumericalError):
        marginal_at_lambda(1.0, 0.0)


def test_retained_zero_mode_is_rejected():
    decomp = eigendecompose(build_rw2(6).structure)
    with pytest.raises(NumericalError, match="eigenvalue 1"):
        pseudo_inverse_diagonal(decomp, 1)


@pytest.mark.parametrize("factor", [0.25, 4.0])
def test_sigma_ref_scale_equivariance(factor):
    P = build_bound1(6, 6).structure
    base = summarize(eigendecompose(P), 3).sigma_ref
    scaled = summarize(eigendecompose(P.scaled(factor)), 3).sigma_ref
    assert scaled == pytest.approx(base / np.sqrt(factor), rel=1e-10)


def test_generalized_inverse_identity():
    model = build_rw2(10)
    P = model.structure.to_dense()
    decomp = eigendecompose(model.structure)
    kept = decomp.eigenvectors[:, 2:]
    sigma = kept @ np.diag(1.0 / decomp.eigenvalues[2:]) @ kept.T
    np.testing.assert_allclose(P @ sigma @ P, P, atol=1e-8 * np.abs(P).max())
    dropped = decomp.eigenvectors[:, :2]
    assert np.abs(sigma @ dropped).max() < 1e-8


def test_oracle_matches_spectral_diagonal(small_models):
    for model in small_models:
        decomp = eigendecompose(model.structure)
        fast = pseudo_inverse_diagonal(decomp, model.null_dim)
        oracle = np.diag(dense_pinv_oracle(model.structure, model.null_dim))
        np.testing.assert_allclose(fast, oracle, rtol=1e-10, err_msg=model.label)


def test_summary_bounds_and_diagnostics():
    _, summary = model_summary(build_bound1(8, 8))
    sigmas = summary.sigma_at_unit_lambda
    assert sigmas.min() <= summary.sigma_ref <= sigmas.max()
    assert summary.null_dim_used == summary.numeric_null_dim == 3
    assert summary.diagnostics["warnings"] == []
    assert summary.largest_dropped < summary.smallest_retained


def test_summary_warns_on_null_dim_mismatch():
    _, summary = model_summary(build_torus1(7, 7, null_dim=3))
    assert summary.numeric_null_dim == 1
    assert summary.warnings


def test_null_dim_override():
    model = build_rw1(6)
    _, summary = model_summary(model, null_dim=2)
    assert summary.null_dim_used == 2


def test_dimension_caps():
    P = build_bound1(6, 6).structure
    with pytest.raises(DimensionCapError):
        eigendecompose(P, max_dimension=20)
    with pytest.raises(DimensionCapError, match="--long-running"):
        eigendecompose(P, long_running_dimension=20)
    assert eigendecompose(P, long_running=True, long_running_dimension=20).dimension == 36


@pytest.mark.parametrize("n,expected", [(11, 1.28), (20, 1.74), (100, 3.89)])
def test_rw1_reference_values(n, expected):
    _, summary = model_summary(build_rw1(n))
    assert summary.sigma_ref == pytest.approx(expected, abs=0.01)


@pytest.mark.parametrize("n,expected,tol", [
    (11, 1.54, 0.01), (20, 3.73, 0.01), (40, 10.486, 0.005), (100, 41.39, 0.05),
])
def test_rw2_reference_values(n, expected, tol):
    _, summary = model_summary(build_rw2(n))
    assert summary.sigma_ref == pytest.approx(expected, abs=tol)
