"""
Self-checks of the engine: kernel identities, covariance reproduction,
finite-difference checks of the derivative formulas and oracle agreements.
A check never raises; it reports pass or fail with a message.
"""
from __future__ import (
    annotations,
)

import math
import time
from dataclasses import (
    dataclass,
)
from enum import (
    Enum,
)
from typing import (
    Callable,
    Iterator,
)

import numpy as np

from fracvol.config import (
    Estimator,
    Model,
    RunConfig,
)
from fracvol.dynamics import (
    DriftSpec,
    RegularizedZConfig,
    StockScheme,
    VolFunction,
    VolKind,
    simulate_z,
)
from fracvol.dynamics.noise import (
    PathBundle,
    Stream,
    correlated_bundle,
    standard_normals,
)
from fracvol.experiments import (
    PUBLISHED,
    TABLE_HURSTS,
    table_config,
    terminal_variance,
)
from fracvol.fbm import (
    FbmScheme,
    cholesky_factor,
    covariance_matrix,
    fbm_paths,
    implied_covariance,
    kernel_weights,
)
from fracvol.fbm.special import (
    gauss_2f1,
    gauss_2f1_euler,
    kernel,
)
from fracvol.fbm.types import (
    HurstParam,
    TimeGrid,
)
from fracvol.malliavin import (
    PathSetup,
    dB_x,
    dV_z,
    dVtilde_x,
    dW_z,
    fd_dB_x,
    fd_dV_z,
    fd_dVtilde_x,
    fd_dW_z,
)
from fracvol.pricing import (
    black_scholes_oracle,
    black_scholes_quadrature,
    estimate_both,
    estimate_direct,
    payoff_h,
    payoff_L,
)
from fracvol.utils.logging import (
    get_logger,
)

logger = get_logger()

COVARIANCE_HURSTS = (0.1, 0.3, 0.7, 0.9)
FD_HURSTS = (0.3, 0.7)
FD_PAIRS = 10
FD_STEPS = 50
PUBLISHED_TOLERANCE = 0.08


class Level(str, Enum):
    FAST = "fast"
    FULL = "full"


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    message: str
    seconds: float


def relative_gap(value: float, reference: float, floor: float = 1e-12) -> float:
    return abs(value - reference) / max(abs(reference), floor)


def covariance_gaps(hurst: HurstParam, grid: TimeGrid) -> tuple[float, float]:
    """Worst relative covariance error for j, k >= N/4 and for the earlier indices."""
    implied = implied_covariance(kernel_weights(hurst, grid))
    exact = covariance_matrix(hurst, grid)
    gaps = np.abs(implied - exact) / np.abs(exact)
    late = grid.n_steps // 4 - 1
    late_gap = float(gaps[late:, late:].max())
    return late_gap, float(gaps.max())


def check_degeneracy() -> tuple[bool, str]:
    grid = TimeGrid(1.0, 32)
    weights = kernel_weights(HurstParam(0.5), grid)
    ones = bool(np.all(np.abs(weights.c[np.tril_indices(32)] - 1.0) <= 1e-12))
    dv = standard_normals(1, Stream.V, 0, 4, 32) * math.sqrt(grid.dt)
    synthesised = fbm_paths(weights, dv)[:, 1:]
    cumulative = bool(np.array_equal(synthesised, np.cumsum(dv, axis=1)))
    return ones and cumulative, f"unit weights {ones}, cumulative sum {cumulative}"


def check_hypergeometric() -> tuple[bool, str]:
    points = ((0.2, 0.3, 1.2, -5.0), (-0.2, 0.2, 0.8, -3.0), (0.4, -0.4, 1.4, -40.0))
    worst = max(relative_gap(gauss_2f1(*p), gauss_2f1_euler(*p)) for p in points)
    return bool(worst <= 1e-10), f"worst relative gap to the Euler integral {worst:.2e}"


def check_kernel() -> tuple[bool, str]:
    hurst = HurstParam(0.7)
    h = hurst.h
    t, s = 1.0, 0.5
    assembled = (
        (t - s) ** (h - 0.5)
        / math.gamma(h + 0.5)
        * gauss_2f1_euler(h - 0.5, 0.5 - h, h + 0.5, 1.0 - t / s)
    )
    gap = relative_gap(kernel(hurst, t, s), assembled)
    return bool(gap <= 1e-6), f"kernel(0.7, 1, 0.5) relative gap {gap:.2e}"


def check_covariance() -> tuple[bool, str]:
    grid = TimeGrid(1.0, 32)
    messages = []
    passed = True
    for h in COVARIANCE_HURSTS:
        late, overall = covariance_gaps(HurstParam(h), grid)
        passed = passed and bool(late <= 0.02 and overall <= 0.05)
        messages.append(f"H={h}: {late:.2%} / {overall:.2%}")
    return passed, ", ".join(messages)


def check_cholesky() -> tuple[bool, str]:
    grid = TimeGrid(1.0, 32)
    worst = 0.0
    for h in (*COVARIANCE_HURSTS, 0.5):
        hurst = HurstParam(h)
        factor = cholesky_factor(hurst, grid)
        error = np.abs(factor @ factor.T - covariance_matrix(hurst, grid))
        worst = max(worst, float(error.max()))
    return bool(worst <= 1e-10), f"worst reconstruction error {worst:.2e}"


def check_payoff() -> tuple[bool, str]:
    strike = 1.0
    points = np.linspace(0.0, 4.0, 100)
    points = points[np.abs(points - strike) > 1e-3]
    step = 1e-6
    worst = 0.0
    for x in points:
        x = float(x)
        rise = payoff_L(x + step, strike) - payoff_L(x - step, strike)
        numeric = rise / (2.0 * step)
        exact = payoff_h(x, strike)
        worst = max(worst, abs(numeric - exact) / max(abs(exact), 1.0))
    at_strike = payoff_L(strike, strike)
    passed = bool(worst <= 1e-6 and at_strike == 0.0)
    return passed, f"worst L' - h gap {worst:.2e}, L(K)={at_strike}"


def check_black_scholes() -> tuple[bool, str]:
    closed = black_scholes_oracle(1.0, 1.0, 0.2, 0.2, 1.0)
    integrated = black_scholes_quadrature(1.0, 1.0, 0.2, 0.2, 1.0)
    gap = abs(closed - integrated)
    return bool(gap <= 1e-8), f"closed form {closed:.10f}, quadrature {integrated:.10f}"


def _fd_setup(hurst: HurstParam, n_steps: int = FD_STEPS) -> PathSetup:
    zcfg = RegularizedZConfig(
        DriftSpec.standard_fcir(0.1, 0.6),
        0.01 if hurst.h <= 0.5 else 0.0,
        nu=0.4,
        z0=1.0,
    )
    weights = kernel_weights(hurst, TimeGrid(1.0, n_steps), FbmScheme.HYBRID)
    return PathSetup(zcfg, weights, 1.0, 0.2, VolFunction.sqrt_shift(0.1))


def _quiet_path(setup: PathSetup, rho: float, seed: int) -> PathBundle:
    """A path whose Z stays well away from zero, so bumps cannot move tau."""
    weights = setup.weights
    batch = correlated_bundle(weights.grid, rho, weights.hurst, weights, seed, 0, 32)
    zpath = simulate_z(setup.zcfg, batch)
    for row in range(batch.n_paths):
        if float(zpath.z[row].min()) > 0.2:
            return batch.select(row)
    raise RuntimeError(f"No path of seed {seed} stays above 0.2")


def _index_pairs(n_steps: int, seed: int) -> Iterator[tuple[int, int]]:
    generator = np.random.default_rng(seed)
    for _ in range(FD_PAIRS):
        u = int(generator.integers(1, n_steps))
        t = int(generator.integers(u, n_steps + 1))
        yield u, t


def check_fd_z() -> tuple[bool, str]:
    worst_w, worst_v = 0.0, 0.0
    for h in FD_HURSTS:
        hurst = HurstParam(h)
        setup = _fd_setup(hurst)
        bundle = _quiet_path(setup, 0.5, seed=7)
        zpath = simulate_z(setup.zcfg, bundle)
        nu = setup.zcfg.nu
        for u, t in _index_pairs(FD_STEPS, seed=int(h * 100)):
            formula = dW_z(u, t, zpath, setup.coefficient, nu, bundle.grid)
            worst_w = max(worst_w, relative_gap(formula, fd_dW_z(setup, bundle, u, t)))
            formula = dV_z(u, t, zpath, setup.coefficient, nu, setup.weights)
            reference = fd_dV_z(setup, bundle, u, t)
            worst_v = max(worst_v, relative_gap(formula, reference, floor=1e-3 * nu))
    passed = bool(worst_w <= 0.01 and worst_v <= 0.02)
    return passed, f"dW_z {worst_w:.2%}, dV_z {worst_v:.2%}"


def check_fd_x() -> tuple[bool, str]:
    worst_tilde, worst_b = 0.0, 0.0
    for h in FD_HURSTS:
        hurst = HurstParam(h)
        setup = _fd_setup(hurst)
        bundle = _quiet_path(setup, 0.6, seed=11)
        zpath = simulate_z(setup.zcfg, bundle)
        for u, _t in _index_pairs(FD_STEPS, seed=int(h * 1000)):
            formula = dVtilde_x(u, 0.6, setup.sigma_of_y, zpath)
            reference = fd_dVtilde_x(setup, bundle, u)
            worst_tilde = max(worst_tilde, relative_gap(formula, reference))

        setup = _fd_setup(hurst, n_steps=32)
        bundle = _quiet_path(setup, 1.0, seed=13)
        zpath = simulate_z(setup.zcfg, bundle)
        n = setup.weights.grid.n_steps
        for u in (1, n // 4, n // 2):
            formula = dB_x(
                u,
                n,
                zpath,
                bundle,
                setup.coefficient,
                setup.zcfg.nu,
                setup.weights,
                setup.sigma_of_y,
            )
            reference = fd_dB_x(setup, bundle, u)
            worst_b = max(worst_b, relative_gap(formula, reference, floor=1e-4))
    passed = bool(worst_tilde <= 0.01 and worst_b <= 0.05)
    return passed, f"dVtilde_x {worst_tilde:.2%}, dB_x {worst_b:.2%}"


def check_terminal_variance() -> tuple[bool, str]:
    grid = TimeGrid(1.0, 256)
    messages = []
    passed = True
    for h in FD_HURSTS:
        hurst = HurstParam(h)
        weights = kernel_weights(hurst, grid)
        bundle = correlated_bundle(grid, 0.0, hurst, weights, 2024, 0, 10_000)
        variance, std_err = terminal_variance(bundle.wh)
        passed = passed and bool(abs(variance - 1.0) <= 3.0 * std_err)
        messages.append(f"H={h}: {variance:.4f} +- {std_err:.4f}")
    return passed, ", ".join(messages)


def degenerate_config(estimator: Estimator = Estimator.BOTH) -> RunConfig:
    """Constant volatility 0.2, frozen Y: the Black-Scholes setting."""
    return RunConfig(
        model=Model.FCIR,
        hurst=0.5,
        nu=0.0,
        sigma=VolKind.CONSTANT,
        sigma_a=0.2,
        eta=0.2,
        rate=0.2,
        rho=0.0,
        spot=1.0,
        strike=1.0,
        steps=100,
        sims=500,
        trials=100,
        estimator=estimator,
        stock_scheme=StockScheme.LOG_EULER,
    )


def check_black_scholes_estimators() -> tuple[bool, str]:
    cfg = degenerate_config()
    direct, malliavin = estimate_both(cfg)
    oracle = black_scholes_oracle(1.0, 1.0, 0.2, 0.2, 1.0)
    passed = all(abs(e.mean - oracle) <= 3.0 * e.std_err for e in (direct, malliavin))
    return passed, (
        f"oracle {oracle:.5f}, direct {direct.mean:.5f} +- {direct.std_err:.5f}, "
        f"malliavin {malliavin.mean:.5f} +- {malliavin.std_err:.5f}"
    )


def check_estimator_agreement() -> tuple[bool, str]:
    messages = []
    passed = True
    for h in (0.3, 0.5, 0.7):
        cfg = table_config(1).replace(hurst=h, trials=20, estimator=Estimator.BOTH)
        direct, malliavin = estimate_both(cfg)
        combined = math.hypot(direct.std_err, malliavin.std_err)
        passed = passed and bool(abs(direct.mean - malliavin.mean) <= 3.0 * combined)
        messages.append(
            f"H={h}: {direct.mean:.4f} vs {malliavin.mean:.4f} (3se {3 * combined:.4f})"
        )
    return passed, ", ".join(messages)


def check_positivity() -> tuple[bool, str]:
    hurst = HurstParam(0.7)
    grid = TimeGrid(1.0, 500)
    weights = kernel_weights(hurst, grid, FbmScheme.VOLTERRA)
    zcfg = RegularizedZConfig(DriftSpec.time_varying(0.4, 1.0, 0.02), 0.0, 0.4, 1.0)
    hits = 0
    for batch in range(10):
        bundle = correlated_bundle(grid, 0.5, hurst, weights, 99, batch * 1000, 1000)
        hits += int(simulate_z(zcfg, bundle).hit.sum())
    return hits <= 10, f"{hits} of 10000 paths hit zero"


def check_epsilon_convergence() -> tuple[bool, str]:
    hurst = HurstParam(0.7)
    grid = TimeGrid(1.0, 200)
    weights = kernel_weights(hurst, grid)
    bundle = correlated_bundle(grid, 0.5, hurst, weights, 5, 0, 100)
    drift = DriftSpec.standard_fcir(0.1, 0.6)
    paths = [
        simulate_z(RegularizedZConfig(drift, eps, 0.4, 1.0), bundle).z
        for eps in (0.1, 0.05, 0.025, 0.0125)
    ]
    gaps = [np.abs(a - b).max(axis=1) for a, b in zip(paths, paths[1:])]
    monotone = (gaps[0] >= gaps[1]) & (gaps[1] >= gaps[2])
    share = float(monotone.mean())
    return bool(share >= 0.9), f"sup gaps nonincreasing on {share:.0%} of paths"


def check_published_cells() -> tuple[bool, str]:
    """Direct H = 1/2 cells of tables 1 and 3 at full scale, with S0 = K = 1."""
    column = TABLE_HURSTS.index(0.5)
    messages = []
    passed = True
    for table in (1, 3):
        result = estimate_direct(table_config(table).replace(hurst=0.5))
        published = PUBLISHED[table][0][column][0]
        passed = passed and abs(result.mean - published) <= PUBLISHED_TOLERANCE
        messages.append(f"table {table}: {result.mean:.4f} vs {published:.4f}")
    return passed, ", ".join(messages)


FAST_CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "kernel degeneracy at H=0.5": check_degeneracy,
    "2F1 against the Euler integral": check_hypergeometric,
    "kernel against the Euler integral": check_kernel,
    "Volterra covariance": check_covariance,
    "Cholesky reconstruction": check_cholesky,
    "payoff antiderivative": check_payoff,
    "Black-Scholes closed form": check_black_scholes,
    "Z derivatives by finite differences": check_fd_z,
    "X derivatives by finite differences": check_fd_x,
    "epsilon convergence": check_epsilon_convergence,
}

FULL_CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "fBm terminal variance": check_terminal_variance,
    "positivity of Z": check_positivity,
    "estimators against Black-Scholes": check_black_scholes_estimators,
    "direct and Malliavin estimators agree": check_estimator_agreement,
    "published H=0.5 cells": check_published_cells,
}


def run_checks(level: Level) -> list[CheckResult]:
    checks = dict(FAST_CHECKS)
    if level is Level.FULL:
        checks.update(FULL_CHECKS)
    results = []
    for name, check in checks.items():
        start = time.perf_counter()
        try:
            passed, message = check()
        except Exception as e:  # noqa: B902 a failing check is a report, not a crash
            passed, message = False, f"{type(e).__name__}: {e}"
        result = CheckResult(name, passed, message, time.perf_counter() - start)
        if passed:
            logger.info(f"PASS {name}: {message}")
        else:
            logger.error(f"FAIL {name}: {message}")
        results.append(result)
    return results
