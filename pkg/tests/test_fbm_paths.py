import numpy as np
import pytest

from fracvol.dynamics.noise import (
    Stream,
    standard_normals,
)
from fracvol.fbm import (
    FbmScheme,
    cholesky_factor,
    covariance_matrix,
    fbm_cholesky_oracle,
    fbm_cholesky_paths,
    fbm_covariance,
    fbm_from_increments,
    fbm_paths,
    kernel_weights,
)
from fracvol.fbm.types import (
    HurstParam,
    TimeGrid,
)


def _increments(grid: TimeGrid, n_paths: int, seed: int = 3) -> np.ndarray:
    return np.sqrt(grid.dt) * standard_normals(seed, Stream.V, 0, n_paths, grid.n_steps)


def test_brownian_paths_are_cumulative_sums() -> None:
    grid = TimeGrid(1.0, 20)
    dv = _increments(grid, 3)
    paths = fbm_paths(kernel_weights(HurstParam(0.5), grid), dv)
    assert paths.shape == (3, 21)
    assert np.all(paths[:, 0] == 0.0)
    assert np.array_equal(paths[:, 1:], np.cumsum(dv, axis=1))


def test_single_path_form_matches_batch() -> None:
    grid = TimeGrid(1.0, 20)
    weights = kernel_weights(HurstParam(0.7), grid)
    dv = _increments(grid, 2)
    residual = standard_normals(3, Stream.RESIDUAL, 0, 2, 21)
    batch = fbm_paths(weights, dv, residual)
    single = fbm_from_increments(weights, dv[1], residual[1])
    np.testing.assert_allclose(single, batch[1])


def test_without_residual_is_linear_in_increments() -> None:
    grid = TimeGrid(1.0, 16)
    weights = kernel_weights(HurstParam(0.3), grid)
    dv = _increments(grid, 1)[0]
    np.testing.assert_allclose(
        fbm_from_increments(weights, 2.0 * dv), 2.0 * fbm_from_increments(weights, dv)
    )


def test_residual_ignored_by_volterra_scheme() -> None:
    grid = TimeGrid(1.0, 16)
    weights = kernel_weights(HurstParam(0.7), grid, FbmScheme.VOLTERRA)
    dv = _increments(grid, 2)
    residual = standard_normals(3, Stream.RESIDUAL, 0, 2, 17)
    assert np.array_equal(fbm_paths(weights, dv, residual), fbm_paths(weights, dv))


def test_shape_errors() -> None:
    grid = TimeGrid(1.0, 8)
    weights = kernel_weights(HurstParam(0.7), grid)
    with pytest.raises(ValueError, match="shape"):
        fbm_paths(weights, np.zeros((2, 7)))
    with pytest.raises(ValueError, match="Residual draws"):
        fbm_paths(weights, np.zeros((2, 8)), np.zeros((2, 8)))
    with pytest.raises(ValueError, match="Expected 8 increments"):
        fbm_from_increments(weights, np.zeros(9))
    with pytest.raises(ValueError, match="Expected 9 residual draws"):
        fbm_from_increments(weights, np.zeros(8), np.zeros(8))


def test_fbm_covariance() -> None:
    assert fbm_covariance(HurstParam(0.5), 0.3, 0.7) == pytest.approx(0.3)
    assert fbm_covariance(HurstParam(0.8), 2.0, 2.0) == pytest.approx(2.0**1.6)
    with pytest.raises(ValueError, match="nonnegative"):
        fbm_covariance(HurstParam(0.8), -1.0, 2.0)


def test_covariance_matrix_entries() -> None:
    hurst = HurstParam(0.3)
    grid = TimeGrid(2.0, 5)
    matrix = covariance_matrix(hurst, grid)
    t = grid.points
    expected = fbm_covariance(hurst, float(t[2]), float(t[4]))
    assert matrix[1, 3] == pytest.approx(expected)
    np.testing.assert_allclose(matrix, matrix.T)


@pytest.mark.parametrize("h", [0.1, 0.5, 0.9])
def test_cholesky_reconstructs_covariance(h: float) -> None:
    hurst = HurstParam(h)
    grid = TimeGrid(1.0, 32)
    factor = cholesky_factor(hurst, grid)
    exact = covariance_matrix(hurst, grid)
    np.testing.assert_allclose(factor @ factor.T, exact, atol=1e-10)
    assert np.all(np.triu(factor, k=1) == 0.0)


def test_cholesky_paths() -> None:
    hurst = HurstParam(0.7)
    grid = TimeGrid(1.0, 10)
    gauss = standard_normals(5, Stream.V, 0, 4, 10)
    paths = fbm_cholesky_paths(hurst, grid, gauss)
    assert paths.shape == (4, 11)
    assert np.all(paths[:, 0] == 0.0)
    np.testing.assert_allclose(fbm_cholesky_oracle(hurst, grid, gauss[2]), paths[2])
    with pytest.raises(ValueError, match="Expected 10 Gaussian draws"):
        fbm_cholesky_oracle(hurst, grid, gauss[0, :9])


def test_hybrid_terminal_variance_statistics() -> None:
    hurst = HurstParam(0.3)
    grid = TimeGrid(1.0, 32)
    weights = kernel_weights(hurst, grid)
    dv = _increments(grid, 4000, seed=11)
    residual = standard_normals(11, Stream.RESIDUAL, 0, 4000, 33)
    terminal = fbm_paths(weights, dv, residual)[:, -1]
    # sample variance of 4000 unit-variance normals: standard error about 0.022
    assert np.var(terminal, ddof=1) == pytest.approx(1.0, abs=0.1)
