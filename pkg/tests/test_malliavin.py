import math

import numpy as np
import pytest

from fracvol.dynamics import (
    DriftSpec,
    RegularizedZConfig,
    VolFunction,
    simulate_z,
)
from fracvol.dynamics.noise import (
    PathBundle,
    correlated_bundle,
)
from fracvol.fbm import (
    kernel_weights,
)
from fracvol.fbm.types import (
    HurstParam,
    TimeGrid,
)
from fracvol.malliavin import (
    MalliavinCoefficient,
    PathSetup,
    coefficient_F,
    coefficient_F_limit,
    dB_x,
    dS_dVtilde,
    dV_x,
    dV_z,
    dVtilde_x,
    dW_z,
    fd_dB_x,
    fd_dV_x,
    fd_dV_z,
    fd_dVtilde_x,
    fd_dW_z,
)

FCIR = DriftSpec.standard_fcir(0.1, 0.6)


def _setup(h: float, n_steps: int = 40) -> PathSetup:
    hurst = HurstParam(h)
    epsilon = 0.01 if h <= 0.5 else 0.0
    return PathSetup(
        RegularizedZConfig(FCIR, epsilon, 0.4, 1.0),
        kernel_weights(hurst, TimeGrid(1.0, n_steps)),
        1.0,
        0.2,
        VolFunction.sqrt_shift(0.1),
    )


def _path(setup: PathSetup, rho: float, seed: int = 5) -> PathBundle:
    """First path of the batch whose Z stays above 0.2."""
    weights = setup.weights
    batch = correlated_bundle(weights.grid, rho, weights.hurst, weights, seed, 0, 32)
    z = simulate_z(setup.zcfg, batch).z
    row = int(np.flatnonzero(z.min(axis=1) > 0.2)[0])
    return batch.select(row)


def test_coefficient_values() -> None:
    mc = MalliavinCoefficient(FCIR, 0.01)
    # f_z Lambda + f Lambda' at z = 1: -1.2 / 1.01 - 0.5 * -1 / 1.01^2
    assert coefficient_F(mc, 0.0, 1.0) == pytest.approx(-1.2 / 1.01 + 0.5 / 1.01**2)
    # below zero Lambda = 1 / epsilon and Lambda' = 0
    assert coefficient_F(mc, 0.0, -0.5) == pytest.approx(0.6 * 100.0)


def test_coefficient_limit() -> None:
    limit = coefficient_F_limit(FCIR, 0.0, 0.8)
    assert limit == pytest.approx(-1.2 - (0.1 - 0.6 * 0.64) / 0.64)
    for epsilon in (1e-4, 1e-6):
        value = coefficient_F(MalliavinCoefficient(FCIR, epsilon), 0.0, 0.8)
        assert value == pytest.approx(limit, rel=10 * epsilon)
    with pytest.raises(ValueError, match="z > 0"):
        coefficient_F_limit(FCIR, 0.0, 0.0)


def test_dw_z_on_diagonal_and_above() -> None:
    setup = _setup(0.7)
    bundle = _path(setup, 0.5)
    zpath = simulate_z(setup.zcfg, bundle)
    grid = bundle.grid
    assert dW_z(7, 7, zpath, setup.coefficient, 0.4, grid) == pytest.approx(0.2)
    assert dW_z(8, 7, zpath, setup.coefficient, 0.4, grid) == 0.0
    with pytest.raises(IndexError):
        dW_z(0, 7, zpath, setup.coefficient, 0.4, grid)
    with pytest.raises(IndexError):
        dW_z(3, 41, zpath, setup.coefficient, 0.4, grid)


def test_dv_z_on_diagonal() -> None:
    setup = _setup(0.3)
    bundle = _path(setup, 0.5)
    zpath = simulate_z(setup.zcfg, bundle)
    expected = 0.2 * setup.weights.entry(9, 9)
    value = dV_z(9, 9, zpath, setup.coefficient, 0.4, setup.weights)
    assert value == pytest.approx(expected)


def test_derivatives_vanish_after_hitting_zero() -> None:
    hurst = HurstParam(0.7)
    weights = kernel_weights(hurst, TimeGrid(1.0, 40))
    zcfg = RegularizedZConfig(DriftSpec.ornstein_uhlenbeck(0.6), 0.0, 4.0, 0.3)
    batch = correlated_bundle(weights.grid, 0.5, hurst, weights, 17, 0, 64)
    zpath = simulate_z(zcfg, batch)
    row = int(np.flatnonzero(zpath.hit)[0])
    tau = int(zpath.tau_index[row])
    mc = MalliavinCoefficient(zcfg.drift, zcfg.epsilon)
    assert dW_z(1, tau, zpath, mc, 4.0, weights.grid, row) == 0.0
    assert dV_z(1, 40, zpath, mc, 4.0, weights, row) == 0.0


@pytest.mark.parametrize("h", [0.3, 0.7])
def test_dw_z_against_finite_differences(h: float) -> None:
    setup = _setup(h)
    bundle = _path(setup, 0.5)
    zpath = simulate_z(setup.zcfg, bundle)
    for u, t in ((1, 40), (5, 12), (20, 33), (39, 40)):
        formula = dW_z(u, t, zpath, setup.coefficient, 0.4, bundle.grid)
        assert formula == pytest.approx(fd_dW_z(setup, bundle, u, t), rel=0.01)


@pytest.mark.parametrize("h", [0.3, 0.7])
def test_dv_z_against_finite_differences(h: float) -> None:
    setup = _setup(h)
    bundle = _path(setup, 0.5)
    zpath = simulate_z(setup.zcfg, bundle)
    for u, t in ((1, 40), (5, 12), (20, 33), (39, 40)):
        formula = dV_z(u, t, zpath, setup.coefficient, 0.4, setup.weights)
        reference = fd_dV_z(setup, bundle, u, t)
        assert formula == pytest.approx(reference, rel=0.02, abs=4e-4)


def test_dvtilde_x_against_finite_differences() -> None:
    setup = _setup(0.7)
    bundle = _path(setup, 0.6)
    zpath = simulate_z(setup.zcfg, bundle)
    for u in (1, 17, 40):
        formula = dVtilde_x(u, 0.6, setup.sigma_of_y, zpath)
        assert formula == pytest.approx(fd_dVtilde_x(setup, bundle, u), rel=0.01)
        y = float(zpath.y[0, u - 1])
        assert formula == pytest.approx(0.8 * math.sqrt(y + 0.1))


def test_ds_dvtilde_scales_with_price() -> None:
    setup = _setup(0.7)
    zpath = simulate_z(setup.zcfg, _path(setup, 0.6))
    expected = 2.5 * dVtilde_x(3, 0.6, setup.sigma_of_y, zpath)
    assert dS_dVtilde(3, 0.6, setup.sigma_of_y, zpath, 2.5) == pytest.approx(expected)


def test_dvtilde_x_needs_imperfect_correlation() -> None:
    setup = _setup(0.7)
    zpath = simulate_z(setup.zcfg, _path(setup, 0.6))
    with pytest.raises(ValueError, match=r"\|rho\| = 1"):
        dVtilde_x(3, 1.0, setup.sigma_of_y, zpath)
    with pytest.raises(IndexError):
        dVtilde_x(41, 0.6, setup.sigma_of_y, zpath)


@pytest.mark.parametrize("h", [0.3, 0.7])
def test_db_x_against_finite_differences(h: float) -> None:
    setup = _setup(h, n_steps=32)
    bundle = _path(setup, 1.0, seed=13)
    zpath = simulate_z(setup.zcfg, bundle)
    for u in (1, 8, 16):
        formula = dB_x(
            u,
            32,
            zpath,
            bundle,
            setup.coefficient,
            0.4,
            setup.weights,
            setup.sigma_of_y,
        )
        assert formula == pytest.approx(fd_dB_x(setup, bundle, u), rel=0.05, abs=1e-4)


def test_dv_x_adds_direct_term() -> None:
    setup = _setup(0.7, n_steps=32)
    bundle = _path(setup, 0.6, seed=13)
    zpath = simulate_z(setup.zcfg, bundle)
    args = (zpath, bundle, setup.coefficient, 0.4, setup.weights, setup.sigma_of_y)
    direct = 0.6 * math.sqrt(float(zpath.y[0, 4]) + 0.1)
    assert dV_x(5, 32, *args) == pytest.approx(direct + dB_x(5, 32, *args))
    assert dV_x(5, 32, *args) == pytest.approx(fd_dV_x(setup, bundle, 5), rel=0.05)


def test_fd_db_x_needs_full_correlation() -> None:
    setup = _setup(0.7)
    bundle = _path(setup, 0.6)
    with pytest.raises(ValueError, match="rho = 1"):
        fd_dB_x(setup, bundle, 3)


def test_finite_differences_need_single_path() -> None:
    setup = _setup(0.7)
    weights = setup.weights
    batch = correlated_bundle(weights.grid, 0.5, weights.hurst, weights, 5, 0, 2)
    with pytest.raises(ValueError, match="one path"):
        fd_dW_z(setup, batch, 1, 5)
