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
from typing import (
    Union,
    overload,
)

import numpy as np
import numpy.typing as npt

from fracvol.dynamics.noise import (
    PathBundle,
)
from fracvol.fbm.types import (
    HurstParam,
)
from fracvol.utils.logging import (
    get_logger,
)

logger = get_logger()

FloatArray = npt.NDArray[np.float64]
Real = Union[float, FloatArray]

TAU_NEVER = -1


class DriftKind(str, Enum):
    ORNSTEIN_UHLENBECK = "ou"
    STANDARD_FCIR = "fcir"
    TIME_VARYING = "fcir-tv"
    FIGURE = "figure"


@dataclass(frozen=True)
class DriftSpec:
    """
    Drift f(t, z) of the Z equation.

        ou       f = -theta z^2
        fcir     f = mu - theta z^2
        fcir-tv  f = nu^2 / (2 theta) (1 - exp(-2 theta t)) + c - theta z^2
        figure   f = sigma^2 / 2 (1 - exp(-2 kappa t)) + kappa (c - z^2)
    """

    kind: DriftKind
    theta: float = 0.0
    mu: float = 0.0
    nu: float = 0.0
    c: float = 0.0
    sigma: float = 0.0
    kappa: float = 0.0

    def __post_init__(self) -> None:
        if self.kind is DriftKind.ORNSTEIN_UHLENBECK:
            # theta = 0 is kept for the driftless case
            if self.theta < 0.0:
                raise ValueError(f"OU drift needs theta >= 0, got {self.theta}")
        elif self.kind is DriftKind.STANDARD_FCIR:
            if self.theta <= 0.0:
                raise ValueError(f"fCIR drift needs theta > 0, got {self.theta}")
        elif self.kind is DriftKind.TIME_VARYING:
            if self.theta <= 0.0 or self.nu <= 0.0 or self.c <= 0.0:
                raise ValueError(
                    "Time-varying drift needs theta, nu, c > 0, "
                    f"got {self.theta}, {self.nu}, {self.c}"
                )
        elif self.kappa <= 0.0 or self.c <= 0.0 or self.sigma < 0.0:
            raise ValueError(
                "Figure drift needs kappa, c > 0 and sigma >= 0, "
                f"got {self.kappa}, {self.c}, {self.sigma}"
            )

    @classmethod
    def ornstein_uhlenbeck(cls, theta: float) -> DriftSpec:
        return cls(DriftKind.ORNSTEIN_UHLENBECK, theta=theta)

    @classmethod
    def standard_fcir(cls, mu: float, theta: float) -> DriftSpec:
        return cls(DriftKind.STANDARD_FCIR, theta=theta, mu=mu)

    @classmethod
    def time_varying(cls, nu: float, theta: float, c: float) -> DriftSpec:
        return cls(DriftKind.TIME_VARYING, theta=theta, nu=nu, c=c)

    @classmethod
    def figure(cls, sigma: float, kappa: float, c: float) -> DriftSpec:
        return cls(DriftKind.FIGURE, sigma=sigma, kappa=kappa, c=c)

    @overload
    def f(self, t: float, z: float) -> float:
        ...

    @overload
    def f(self, t: float, z: FloatArray) -> FloatArray:
        ...

    def f(self, t: float, z: Real) -> Real:
        if self.kind is DriftKind.ORNSTEIN_UHLENBECK:
            return -self.theta * z * z
        if self.kind is DriftKind.STANDARD_FCIR:
            return self.mu - self.theta * z * z
        if self.kind is DriftKind.TIME_VARYING:
            decay = -math.expm1(-2.0 * self.theta * t)
            mean_reversion = self.nu**2 / (2.0 * self.theta) * decay
            return mean_reversion + (self.c - self.theta * z * z)
        mean_reversion = 0.5 * self.sigma**2 * -math.expm1(-2.0 * self.kappa * t)
        return mean_reversion + self.kappa * (self.c - z * z)

    @overload
    def df_dz(self, t: float, z: float) -> float:
        ...

    @overload
    def df_dz(self, t: float, z: FloatArray) -> FloatArray:
        ...

    def df_dz(self, t: float, z: Real) -> Real:
        if self.kind is DriftKind.FIGURE:
            return -2.0 * self.kappa * z
        return -2.0 * self.theta * z


def drift_figure_preset(
    sigma: float = 0.1,
    kappa: float = 1.0,
    c: float = 2.0,
) -> DriftSpec:
    return DriftSpec.figure(sigma=sigma, kappa=kappa, c=c)


class VolKind(str, Enum):
    SQRT_SHIFT = "sqrt-shift"
    AFFINE = "affine"
    SQRT_QUAD = "sqrt-quad"
    CONSTANT = "constant"


@dataclass(frozen=True)
class VolFunction:
    """
    sigma(y) of the stock equation, one of sqrt(y + a), a y + b, sqrt(y^2 + a)
    and the constant a.
    Every kind but `constant` is strictly positive on y >= 0.
    """

    kind: VolKind
    a: float
    b: float = 0.0

    def __post_init__(self) -> None:
        if self.kind is VolKind.AFFINE:
            if self.a < 0.0 or self.b <= 0.0:
                raise ValueError(
                    f"Affine vol needs a >= 0 and b > 0, got {self.a}, {self.b}"
                )
        elif self.kind is VolKind.CONSTANT:
            if self.a < 0.0:
                raise ValueError(f"Constant vol must be nonnegative, got {self.a}")
        elif self.a <= 0.0:
            raise ValueError(
                f"{self.kind.value} vol needs a positive shift, got {self.a}"
            )

    def __str__(self) -> str:
        if self.kind is VolKind.SQRT_SHIFT:
            return f"sqrt(y+{self.a:g})"
        if self.kind is VolKind.AFFINE:
            return f"{self.a:g}y+{self.b:g}"
        if self.kind is VolKind.SQRT_QUAD:
            return f"sqrt(y^2+{self.a:g})"
        return f"{self.a:g}"

    @classmethod
    def sqrt_shift(cls, a: float) -> VolFunction:
        return cls(VolKind.SQRT_SHIFT, a)

    @classmethod
    def affine(cls, a: float, b: float) -> VolFunction:
        return cls(VolKind.AFFINE, a, b)

    @classmethod
    def sqrt_quad(cls, c: float) -> VolFunction:
        return cls(VolKind.SQRT_QUAD, c)

    @classmethod
    def constant(cls, value: float) -> VolFunction:
        return cls(VolKind.CONSTANT, value)

    @property
    def is_zero(self) -> bool:
        return self.kind is VolKind.CONSTANT and self.a == 0.0

    @overload
    def sigma(self, y: float) -> float:
        ...

    @overload
    def sigma(self, y: FloatArray) -> FloatArray:
        ...

    def sigma(self, y: Real) -> Real:
        if self.kind is VolKind.SQRT_SHIFT:
            return np.sqrt(y + self.a)
        if self.kind is VolKind.AFFINE:
            return self.a * y + self.b
        if self.kind is VolKind.SQRT_QUAD:
            return np.sqrt(y * y + self.a)
        if isinstance(y, np.ndarray):
            return np.full_like(y, self.a)
        return self.a

    @overload
    def sigma_prime(self, y: float) -> float:
        ...

    @overload
    def sigma_prime(self, y: FloatArray) -> FloatArray:
        ...

    def sigma_prime(self, y: Real) -> Real:
        if self.kind is VolKind.SQRT_SHIFT:
            return 0.5 / np.sqrt(y + self.a)
        if self.kind is VolKind.SQRT_QUAD:
            return y / np.sqrt(y * y + self.a)
        slope = self.a if self.kind is VolKind.AFFINE else 0.0
        if isinstance(y, np.ndarray):
            return np.full_like(y, slope)
        return slope


@overload
def lambda_eps(z: float, epsilon: float) -> float:
    ...


@overload
def lambda_eps(z: FloatArray, epsilon: float) -> FloatArray:
    ...


def lambda_eps(z: Real, epsilon: float) -> Real:
    """(z 1_{z > 0} + epsilon)^-1"""
    if epsilon < 0.0:
        raise ValueError(f"Regularisation must be nonnegative, got {epsilon}")
    values = np.asarray(z, dtype=np.float64)
    if epsilon == 0.0 and np.any(values <= 0.0):
        raise ZeroDivisionError("Unregularised 1/z evaluated at z <= 0")
    result = 1.0 / (np.where(values > 0.0, values, 0.0) + epsilon)
    return float(result) if result.ndim == 0 else result


@overload
def lambda_eps_prime(z: float, epsilon: float) -> float:
    ...


@overload
def lambda_eps_prime(z: FloatArray, epsilon: float) -> FloatArray:
    ...


def lambda_eps_prime(z: Real, epsilon: float) -> Real:
    """0 for z < 0, -(z + epsilon)^-2 for z >= 0"""
    if epsilon < 0.0:
        raise ValueError(f"Regularisation must be nonnegative, got {epsilon}")
    values = np.asarray(z, dtype=np.float64)
    if epsilon == 0.0 and np.any(values <= 0.0):
        raise ZeroDivisionError("Unregularised 1/z^2 evaluated at z <= 0")
    positive = values >= 0.0
    shifted = np.where(positive, values, 0.0) + epsilon
    result = np.where(positive, -1.0 / (shifted * shifted), 0.0)
    return float(result) if result.ndim == 0 else result


def default_epsilon(hurst: HurstParam) -> float:
    return 0.01 if hurst.h <= 0.5 else 0.0


@dataclass(frozen=True)
class RegularizedZConfig:
    drift: DriftSpec
    epsilon: float
    nu: float
    z0: float
    freeze: bool = True

    def __post_init__(self) -> None:
        if self.epsilon < 0.0:
            raise ValueError(f"Regularisation must be nonnegative, got {self.epsilon}")
        if self.nu < 0.0:
            raise ValueError(f"Vol-of-vol must be nonnegative, got {self.nu}")
        if not (self.z0 > 0.0):
            raise ValueError(f"Initial value z0 must be positive, got {self.z0}")

    def check_epsilon_policy(self, hurst: HurstParam) -> None:
        """
        Unregularised drift is only allowed for H > 1/2, and only on frozen paths
        unless the drift is the OU one, which never divides by z.
        """
        if self.epsilon != 0.0:
            return
        if hurst.h <= 0.5:
            raise ValueError(f"epsilon = 0 requires H > 1/2, got {hurst}")
        if not self.freeze and self.drift.kind is not DriftKind.ORNSTEIN_UHLENBECK:
            raise ValueError(
                "epsilon = 0 without freezing divides by Z once it reaches zero; "
                "use freeze=on or epsilon > 0"
            )

    def drift_term(self, t: float, z: FloatArray) -> FloatArray:
        """
        f(t, z) Lambda_eps(z). Unfrozen OU paths may cross zero: there the drift
        is the odd extension -theta z |z| / (|z| + eps), which is -theta z at eps = 0.
        """
        if self.freeze or self.drift.kind is not DriftKind.ORNSTEIN_UHLENBECK:
            return self.drift.f(t, z) * lambda_eps(z, self.epsilon)
        magnitude = np.abs(z)
        denominator = magnitude + self.epsilon
        ratio = np.divide(
            magnitude,
            denominator,
            out=np.zeros_like(magnitude),
            where=denominator > 0.0,
        )
        return -self.drift.theta * z * ratio


@dataclass(frozen=True, eq=False)
class ZPath:
    """
    Simulated Z and Y = Z^2 1_{[0, tau)} for a batch of paths, shape (paths, N + 1).
    tau_index holds the first grid index with z <= 0, or TAU_NEVER.
    """

    z: FloatArray
    y: FloatArray
    tau_index: npt.NDArray[np.int64]

    @property
    def hit(self) -> npt.NDArray[np.bool_]:
        return self.tau_index != TAU_NEVER

    @property
    def n_paths(self) -> int:
        return int(self.z.shape[0])


def simulate_z(cfg: RegularizedZConfig, bundle: PathBundle) -> ZPath:
    grid = bundle.grid
    n = grid.n_steps
    dt = grid.dt
    times = grid.points
    n_paths = bundle.n_paths
    noise = 0.5 * cfg.nu * np.diff(bundle.wh, axis=1)

    z = np.empty((n_paths, n + 1), dtype=np.float64)
    z[:, 0] = cfg.z0
    tau = np.full(n_paths, TAU_NEVER, dtype=np.int64)

    for i in range(n):
        t = float(times[i])
        if not cfg.freeze:
            current = z[:, i]
            drift = cfg.drift_term(t, current)
            z[:, i + 1] = current + 0.5 * drift * dt + noise[:, i]
            continue

        alive = tau == TAU_NEVER
        step = np.zeros(n_paths, dtype=np.float64)
        if alive.any():
            # paths that already hit zero are skipped before the drift is evaluated
            current = z[alive, i]
            drift = cfg.drift_term(t, current)
            step[alive] = current + 0.5 * drift * dt + noise[alive, i]
            hit_now = alive & (step <= 0.0)
            tau[hit_now] = i + 1
            step[hit_now] = 0.0
        z[:, i + 1] = step

    hits = int(np.count_nonzero(tau != TAU_NEVER))
    if hits:
        logger.debug(f"{hits} of {n_paths} paths of Z hit zero before T={grid.t_end:g}")
    return ZPath(z, z * z, tau)


class StockScheme(str, Enum):
    EULER = "euler"
    LOG_EULER = "log-euler"


@dataclass(frozen=True, eq=False)
class StockPath:
    """
    Stock and log-stock paths, shape (paths, N + 1). x is NaN where s <= 0 and
    `flagged` marks the paths whose price left (0, inf).
    """

    s: FloatArray
    x: FloatArray
    flagged: npt.NDArray[np.bool_]


def simulate_stock(
    s0: float,
    eta: float,
    sigma_of_y: VolFunction,
    zpath: ZPath,
    bundle: PathBundle,
    scheme: StockScheme = StockScheme.EULER,
) -> StockPath:
    if not (s0 > 0.0):
        raise ValueError(f"Initial price must be positive, got {s0}")
    n = bundle.grid.n_steps
    dt = bundle.grid.dt
    vol = sigma_of_y.sigma(zpath.y[:, :n])

    if scheme is StockScheme.LOG_EULER:
        x = np.empty_like(zpath.y)
        x[:, 0] = math.log(s0)
        increments = (eta - 0.5 * vol * vol) * dt + vol * bundle.db
        np.cumsum(increments, axis=1, out=x[:, 1:])
        x[:, 1:] += x[:, :1]
        s = np.exp(x)
        return StockPath(s, x, np.zeros(s.shape[0], dtype=np.bool_))

    s = np.empty_like(zpath.y)
    s[:, 0] = s0
    growth = 1.0 + eta * dt + vol * bundle.db
    for i in range(n):
        s[:, i + 1] = s[:, i] * growth[:, i]
    positive = s > 0.0
    flagged = ~positive.all(axis=1)
    x = np.full_like(s, np.nan)
    np.log(s, out=x, where=positive)
    return StockPath(s, x, flagged)
