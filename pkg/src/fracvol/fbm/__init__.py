from __future__ import (
    annotations,
)

import math
from dataclasses import (
    dataclass,
)
from enum import (
    Enum,
)
from functools import (
    lru_cache,
)

import numpy as np
import numpy.typing as npt
from scipy import (
    linalg,
)

from fracvol.fbm.special import (
    kernel_values,
    kernel_variance_factor,
)
from fracvol.fbm.types import (
    HurstParam,
    TimeGrid,
)
from fracvol.utils.logging import (
    get_logger,
    log_duration,
)

logger = get_logger()

QUADRATURE_NODES = 16

FloatArray = npt.NDArray[np.float64]


class FactorizationError(ArithmeticError):
    pass


class FbmScheme(str, Enum):
    HYBRID = "hybrid"
    VOLTERRA = "volterra"


@dataclass(frozen=True, eq=False)
class KernelWeights:
    """
    Integrated Volterra kernel on a uniform grid.

    c[j - 1, i - 1] is the mean value of the normalised kernel K(t_j, .) over the
    cell [t_{i-1}, t_i]; entries above the diagonal are zero and never queried.
    With the hybrid scheme, `origin` holds the loading of each W(t_j) on one extra
    normal draw (the part of the first cell the mean value misses) and `diagonal`
    the loading on an independent draw per grid point; both are zero otherwise.
    The diagonal draws are independent across j: hybrid paths match Var W(t_j)
    but add that variance to every increment.
    """

    hurst: HurstParam
    grid: TimeGrid
    c: FloatArray
    origin: FloatArray
    diagonal: FloatArray
    scheme: FbmScheme

    def __repr__(self) -> str:
        n = self.grid.n_steps
        return f"KernelWeights({self.hurst}, N={n}, {self.scheme.value})"

    def entry(self, j: int, i: int) -> float:
        n = self.grid.n_steps
        if not (1 <= j <= n) or not (1 <= i <= n):
            raise IndexError(f"Weight index ({j}, {i}) outside 1..{n}")
        if i > j:
            raise IndexError(f"Weight ({j}, {i}) lies above the diagonal")
        return float(self.c[j - 1, i - 1])

    @property
    def uses_residual(self) -> bool:
        return self.scheme is FbmScheme.HYBRID and not self.hurst.is_brownian


@lru_cache
def _unit_rule() -> tuple[FloatArray, FloatArray]:
    nodes, weights = np.polynomial.legendre.leggauss(QUADRATURE_NODES)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _graded_rule(gamma: float) -> tuple[FloatArray, FloatArray]:
    """
    Rule on [0, 1] for integrands that behave like u^gamma at u = 0 (gamma > -1):
    u = x^p with p = 1 / (1 + gamma) makes the transformed integrand smooth.
    """
    nodes, weights = _unit_rule()
    p = 1.0 / (1.0 + gamma)
    return nodes**p, p * nodes ** (p - 1.0) * weights


def _unit_row(hurst: HurstParam, j: int) -> tuple[FloatArray, float]:
    """
    Cell integrals of K(j, .) over [i - 1, i], i = 1..j, with unit spacing,
    plus the first-cell moment against s^-alpha.
    """
    alpha = hurst.alpha
    t = float(j)
    nodes, weights = _unit_rule()
    left_s, left_w = _graded_rule(-alpha)
    moment_s, moment_w = _graded_rule(-2.0 * alpha)
    right_gap, right_w = _graded_rule(hurst.h - 0.5)
    row = np.empty(j, dtype=np.float64)

    if j == 1:
        # both endpoint singularities live in the same cell: split it in halves
        s = 0.5 * left_s
        left = left_w @ kernel_values(hurst, t, s, t - s)
        s = 0.5 * moment_s
        moment_left = moment_w @ (kernel_values(hurst, t, s, t - s) * s**-alpha)
        gap = 0.5 * right_gap
        s = t - gap
        right_values = kernel_values(hurst, t, s, gap)
        row[0] = 0.5 * (left + right_w @ right_values)
        moment = 0.5 * (moment_left + right_w @ (right_values * s**-alpha))
        return row, float(moment)

    row[0] = left_w @ kernel_values(hurst, t, left_s, t - left_s)
    moment_values = kernel_values(hurst, t, moment_s, t - moment_s)
    moment = moment_w @ (moment_values * moment_s**-alpha)
    if j > 2:
        s = np.arange(1, j - 1, dtype=np.float64)[:, np.newaxis] + nodes[np.newaxis, :]
        row[1 : j - 1] = kernel_values(hurst, t, s, t - s) @ weights
    row[j - 1] = right_w @ kernel_values(hurst, t, t - right_gap, right_gap)
    return row, float(moment)


def _read_only(array: FloatArray) -> FloatArray:
    array.setflags(write=False)
    return array


@lru_cache(maxsize=32)
def kernel_weights(
    hurst: HurstParam,
    grid: TimeGrid,
    scheme: FbmScheme = FbmScheme.HYBRID,
) -> KernelWeights:
    n = grid.n_steps
    if hurst.is_brownian:
        c = np.tril(np.ones((n, n), dtype=np.float64))
        return KernelWeights(
            hurst,
            grid,
            _read_only(c),
            _read_only(np.zeros(n)),
            _read_only(np.zeros(n)),
            scheme,
        )

    h = hurst.h
    alpha = hurst.alpha
    unit = np.zeros((n, n), dtype=np.float64)
    moments = np.empty(n, dtype=np.float64)
    with log_duration(logger, f"Kernel weights for {hurst} on {n} steps"):
        for j in range(1, n + 1):
            row, moment = _unit_row(hurst, j)
            unit[j - 1, :j] = row
            moments[j - 1] = moment - row[0] / (1.0 - alpha)

    # K(ct, cs) = c^(H - 1/2) K(t, s) carries the unit-spacing integrals to the grid
    norm = kernel_variance_factor(hurst) ** -0.5
    c = grid.dt ** (h - 0.5) * norm * unit
    origin = np.zeros(n)
    diagonal = np.zeros(n)

    if scheme is FbmScheme.HYBRID:
        # squared norm of s^-alpha minus its cell mean on the unit cell
        q = alpha**2 / ((1.0 - 2.0 * alpha) * (1.0 - alpha) ** 2)
        origin = grid.dt**h * norm * moments / math.sqrt(q)
        target = grid.points[1:] ** (2.0 * h)
        missing = target - grid.dt * np.sum(c**2, axis=1) - origin**2
        clipped = missing < -1e-12 * target
        if clipped.any():
            logger.warning(
                f"{hurst}: negative residual variance clipped at {int(clipped.sum())} "
                f"grid points (worst {float(missing.min()):.3e})"
            )
        diagonal = np.sqrt(np.clip(missing, 0.0, None))

    logger.debug(
        f"Kernel weights {hurst} N={n} {scheme.value}: "
        f"max weight {float(c.max()):.4g}, "
        f"max diagonal loading {float(diagonal.max()):.4g}"
    )
    return KernelWeights(
        hurst,
        grid,
        _read_only(c),
        _read_only(origin),
        _read_only(diagonal),
        scheme,
    )


def fbm_paths(
    w: KernelWeights,
    dv: FloatArray,
    residual: FloatArray | None = None,
) -> FloatArray:
    """
    Batched synthesis: dv has shape (paths, N) and residual, when given, shape
    (paths, N + 1) of standard normals. Returns W with shape (paths, N + 1).
    """
    n = w.grid.n_steps
    dv = np.asarray(dv, dtype=np.float64)
    if dv.ndim != 2 or dv.shape[1] != n:
        raise ValueError(f"Increments must have shape (paths, {n}), got {dv.shape}")
    paths = np.zeros((dv.shape[0], n + 1), dtype=np.float64)
    if w.hurst.is_brownian:
        np.cumsum(dv, axis=1, out=paths[:, 1:])
    else:
        paths[:, 1:] = dv @ w.c.T

    if residual is not None:
        residual = np.asarray(residual, dtype=np.float64)
        if residual.shape != (dv.shape[0], n + 1):
            raise ValueError(
                f"Residual draws must have shape {(dv.shape[0], n + 1)}, "
                f"got {residual.shape}"
            )
        if w.uses_residual:
            paths[:, 1:] += residual[:, :1] * w.origin + residual[:, 1:] * w.diagonal
    return paths


def fbm_from_increments(
    w: KernelWeights,
    dv: FloatArray,
    residual: FloatArray | None = None,
) -> FloatArray:
    dv = np.asarray(dv, dtype=np.float64)
    n = w.grid.n_steps
    if dv.shape != (n,):
        raise ValueError(f"Expected {n} increments, got shape {dv.shape}")
    if residual is not None:
        residual = np.asarray(residual, dtype=np.float64)
        if residual.shape != (n + 1,):
            raise ValueError(
                f"Expected {n + 1} residual draws, got shape {residual.shape}"
            )
        residual = residual[np.newaxis, :]
    return fbm_paths(w, dv[np.newaxis, :], residual)[0]


def implied_covariance(w: KernelWeights) -> FloatArray:
    """Covariance of (W(t_1), ..., W(t_N)) produced by the weights."""
    cov = w.grid.dt * (w.c @ w.c.T)
    if w.uses_residual:
        cov += np.outer(w.origin, w.origin) + np.diag(w.diagonal**2)
    return cov


def fbm_covariance(hurst: HurstParam, t: float, s: float) -> float:
    if t < 0.0 or s < 0.0:
        raise ValueError(f"Covariance needs nonnegative times, got t={t}, s={s}")
    two_h = 2.0 * hurst.h
    return 0.5 * (t**two_h + s**two_h - abs(t - s) ** two_h)


def covariance_matrix(hurst: HurstParam, grid: TimeGrid) -> FloatArray:
    t = grid.points[1:]
    two_h = 2.0 * hurst.h
    powers = t**two_h
    gaps = np.abs(t[:, np.newaxis] - t[np.newaxis, :]) ** two_h
    return 0.5 * (powers[:, np.newaxis] + powers[np.newaxis, :] - gaps)


@lru_cache(maxsize=16)
def cholesky_factor(hurst: HurstParam, grid: TimeGrid) -> FloatArray:
    try:
        factor = linalg.cholesky(covariance_matrix(hurst, grid), lower=True)
    except linalg.LinAlgError as e:
        raise FactorizationError(
            f"Covariance of {hurst} on {grid.n_steps} steps is not numerically "
            "positive definite, the grid is too fine for double precision"
        ) from e
    return _read_only(factor)


def fbm_cholesky_paths(
    hurst: HurstParam,
    grid: TimeGrid,
    gauss: FloatArray,
) -> FloatArray:
    n = grid.n_steps
    gauss = np.asarray(gauss, dtype=np.float64)
    if gauss.ndim != 2 or gauss.shape[1] != n:
        raise ValueError(
            f"Gaussian draws must have shape (paths, {n}), got {gauss.shape}"
        )
    paths = np.zeros((gauss.shape[0], n + 1), dtype=np.float64)
    paths[:, 1:] = gauss @ cholesky_factor(hurst, grid).T
    return paths


def fbm_cholesky_oracle(
    hurst: HurstParam,
    grid: TimeGrid,
    d_gauss: FloatArray,
) -> FloatArray:
    d_gauss = np.asarray(d_gauss, dtype=np.float64)
    if d_gauss.shape != (grid.n_steps,):
        raise ValueError(
            f"Expected {grid.n_steps} Gaussian draws, got shape {d_gauss.shape}"
        )
    return fbm_cholesky_paths(hurst, grid, d_gauss[np.newaxis, :])[0]


__all__ = [
    "FactorizationError",
    "FbmScheme",
    "HurstParam",
    "KernelWeights",
    "TimeGrid",
    "cholesky_factor",
    "covariance_matrix",
    "fbm_cholesky_oracle",
    "fbm_cholesky_paths",
    "fbm_covariance",
    "fbm_from_increments",
    "fbm_paths",
    "implied_covariance",
    "kernel_weights",
]
