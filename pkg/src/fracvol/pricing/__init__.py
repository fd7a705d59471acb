from __future__ import (
    annotations,
)

import math
import time
from concurrent.futures import (
    ThreadPoolExecutor,
)
from dataclasses import (
    dataclass,
)
from enum import (
    Enum,
)
from typing import (
    Sequence,
    overload,
)

import numpy as np
import numpy.typing as npt
from scipy import (
    integrate,
    stats,
)

from fracvol.config import (
    ConfigError,
    Estimator,
    RunConfig,
)
from fracvol.dynamics import (
    Real,
    VolFunction,
    ZPath,
    simulate_stock,
    simulate_z,
)
from fracvol.dynamics.noise import (
    PathBundle,
    correlated_bundle,
)
from fracvol.utils.logging import (
    get_logger,
)

logger = get_logger()

FloatArray = npt.NDArray[np.float64]

EXCLUSION_WARNING_RATE = 0.005
SQRT_TWO_PI = math.sqrt(2.0 * math.pi)


class Quantity(str, Enum):
    DIRECT = "direct"
    MALLIAVIN = "malliavin"
    IDENTITY = "identity"


@overload
def payoff_h(x: float, strike: float) -> float:
    ...


@overload
def payoff_h(x: FloatArray, strike: float) -> FloatArray:
    ...


def payoff_h(x: Real, strike: float) -> Real:
    """European call plus binary: (x - K)+ + 1_{x > K}"""
    values = np.asarray(x, dtype=np.float64)
    result = np.where(values > strike, values - strike + 1.0, 0.0)
    return float(result) if result.ndim == 0 else result


@overload
def payoff_L(x: float, strike: float) -> float:  # noqa: N802
    ...


@overload
def payoff_L(x: FloatArray, strike: float) -> FloatArray:  # noqa: N802
    ...


def payoff_L(x: Real, strike: float) -> Real:  # noqa: N802
    """Antiderivative of payoff_h vanishing below the strike: (x - K)(x - K + 2) / 2"""
    values = np.asarray(x, dtype=np.float64)
    excess = np.where(values >= strike, values - strike, 0.0)
    result = 0.5 * excess * (excess + 2.0)
    return float(result) if result.ndim == 0 else result


@dataclass(frozen=True)
class PayoffSpec:
    strike: float

    def __post_init__(self) -> None:
        if not (self.strike > 0.0):
            raise ValueError(f"Strike must be positive, got {self.strike}")

    @overload
    def h(self, x: float) -> float:
        ...

    @overload
    def h(self, x: FloatArray) -> FloatArray:
        ...

    def h(self, x: Real) -> Real:
        return payoff_h(x, self.strike)

    @overload
    def antiderivative(self, x: float) -> float:
        ...

    @overload
    def antiderivative(self, x: FloatArray) -> FloatArray:
        ...

    def antiderivative(self, x: Real) -> Real:
        return payoff_L(x, self.strike)


def malliavin_weight(
    zpath: ZPath,
    sigma_of_y: VolFunction,
    bundle: PathBundle,
    rho: float,
) -> FloatArray:
    """
    I_T = 1 / (T sqrt(1 - rho^2)) sum_i dV~_i / sigma(Y_{i-1}), one value per path.
    """
    if not (-1.0 < rho < 1.0):
        raise ValueError(f"The Malliavin weight needs |rho| < 1, got {rho}")
    n = bundle.grid.n_steps
    vol = sigma_of_y.sigma(zpath.y[:, :n])
    if not np.all(vol > 0.0):
        raise ValueError(f"Volatility {sigma_of_y} is not positive along the paths")
    scale = 1.0 / (bundle.grid.t_end * math.sqrt(1.0 - rho * rho))
    return scale * np.sum(bundle.dvt / vol, axis=1)


def coefficient_of_variation(trial_means: Sequence[float]) -> float:
    mean = math.fsum(trial_means) / len(trial_means)
    std = trial_std(trial_means)
    if std == 0.0:
        return 0.0
    return std / mean


def trial_std(trial_means: Sequence[float]) -> float:
    n = len(trial_means)
    if n < 2:
        raise ValueError(f"Dispersion needs at least two trials, got {n}")
    mean = math.fsum(trial_means) / n
    return math.sqrt(math.fsum((m - mean) ** 2 for m in trial_means) / (n - 1))


@dataclass(frozen=True)
class MCEstimate:
    """
    Grand mean over trials with the dispersion of the per-trial means:
    cv = std / mean and std_err = std / sqrt(n_trials).
    """

    estimator: str
    mean: float
    std_err: float
    cv: float
    n_sims: int
    n_trials: int
    n_excluded: int
    seed: int
    trial_means: tuple[float, ...]
    wall_time: float = 0.0

    @property
    def exclusion_rate(self) -> float:
        return self.n_excluded / (self.n_sims * self.n_trials)

    @property
    def flagged(self) -> bool:
        return bool(self.exclusion_rate >= EXCLUSION_WARNING_RATE)

    @classmethod
    def from_trials(
        cls,
        estimator: str,
        trial_means: Sequence[float],
        n_sims: int,
        n_excluded: int,
        seed: int,
        wall_time: float = 0.0,
    ) -> MCEstimate:
        n_trials = len(trial_means)
        std = trial_std(trial_means)
        return cls(
            estimator=estimator,
            mean=math.fsum(trial_means) / n_trials,
            std_err=std / math.sqrt(n_trials),
            cv=coefficient_of_variation(trial_means),
            n_sims=n_sims,
            n_trials=n_trials,
            n_excluded=n_excluded,
            seed=seed,
            trial_means=tuple(trial_means),
            wall_time=wall_time,
        )


@dataclass(frozen=True)
class TrialOutcome:
    means: dict[Quantity, float]
    n_excluded: int


def _trial(
    cfg: RunConfig,
    trial: int,
    quantities: tuple[Quantity, ...],
) -> TrialOutcome:
    weights = cfg.weights()
    bundle = correlated_bundle(
        cfg.grid,
        cfg.rho,
        cfg.hurst_param,
        weights,
        cfg.seed,
        trial * cfg.sims,
        cfg.sims,
    )
    vol = cfg.vol()
    zpath = simulate_z(cfg.z_config(), bundle)
    stock = simulate_stock(cfg.spot, cfg.eta, vol, zpath, bundle, cfg.stock_scheme)

    kept = ~stock.flagged
    n_kept = int(np.count_nonzero(kept))
    if n_kept == 0:
        raise RuntimeError(f"Every path of trial {trial} left (0, inf)")
    s_terminal = stock.s[kept, -1]
    discount = math.exp(-cfg.rate * cfg.horizon)
    payoff = PayoffSpec(cfg.strike)

    weight: FloatArray | None = None
    if Quantity.MALLIAVIN in quantities or Quantity.IDENTITY in quantities:
        weight = malliavin_weight(zpath, vol, bundle, cfg.rho)[kept]

    means: dict[Quantity, float] = {}
    for quantity in quantities:
        if quantity is Quantity.DIRECT:
            values = discount * payoff.h(s_terminal)
        elif quantity is Quantity.MALLIAVIN:
            assert weight is not None  # noqa: S101
            antiderivative = payoff.antiderivative(s_terminal)
            values = discount * antiderivative / s_terminal * (1.0 + weight)
        else:
            assert weight is not None  # noqa: S101
            values = s_terminal / s_terminal * (1.0 + weight)
        means[quantity] = math.fsum(values.tolist()) / n_kept
    return TrialOutcome(means, cfg.sims - n_kept)


def run_trials(
    cfg: RunConfig,
    quantities: tuple[Quantity, ...],
) -> dict[Quantity, MCEstimate]:
    """
    Trial k simulates path indices [k sims, (k + 1) sims). Trials run on up to
    `cfg.threads` workers; their means are reduced in trial order.
    """
    if cfg.trials < 2:
        raise ConfigError(
            f"The trials protocol needs at least 2 trials, got {cfg.trials}"
        )
    if Quantity.MALLIAVIN in quantities or Quantity.IDENTITY in quantities:
        if abs(cfg.rho) == 1.0:
            raise ConfigError("The Malliavin weight needs |rho| < 1")
        if cfg.vol().is_zero:
            raise ConfigError(
                "The Malliavin weight is undefined for zero volatility"
            )

    start = time.perf_counter()
    cfg.weights()  # built once before the workers share it
    with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
        outcomes = list(
            executor.map(lambda k: _trial(cfg, k, quantities), range(cfg.trials))
        )
    wall_time = time.perf_counter() - start

    n_excluded = sum(outcome.n_excluded for outcome in outcomes)
    estimates = {}
    for quantity in quantities:
        estimate = MCEstimate.from_trials(
            quantity.value,
            [outcome.means[quantity] for outcome in outcomes],
            cfg.sims,
            n_excluded,
            cfg.seed,
            wall_time,
        )
        logger.info(
            f"{quantity.value}: mean {estimate.mean:.9g} cv {estimate.cv:.4g} "
            f"se {estimate.std_err:.3g} "
            f"({cfg.trials} x {cfg.sims} paths, {wall_time:.1f}s)"
        )
        estimates[quantity] = estimate
    if estimates and next(iter(estimates.values())).flagged:
        logger.warning(
            f"{n_excluded} of {cfg.sims * cfg.trials} paths "
            "excluded for a nonpositive price"
        )
    return estimates


def estimate_direct(cfg: RunConfig) -> MCEstimate:
    return run_trials(cfg, (Quantity.DIRECT,))[Quantity.DIRECT]


def estimate_malliavin(cfg: RunConfig) -> MCEstimate:
    return run_trials(cfg, (Quantity.MALLIAVIN,))[Quantity.MALLIAVIN]


def estimate_both(cfg: RunConfig) -> tuple[MCEstimate, MCEstimate]:
    """Both estimators on the same driving noise."""
    estimates = run_trials(cfg, (Quantity.DIRECT, Quantity.MALLIAVIN))
    return estimates[Quantity.DIRECT], estimates[Quantity.MALLIAVIN]


def estimate_weight_identity(cfg: RunConfig) -> MCEstimate:
    """E[(S_T / S_T)(1 + I_T)], which equals 1 for an unbiased weight."""
    return run_trials(cfg, (Quantity.IDENTITY,))[Quantity.IDENTITY]


def estimate(cfg: RunConfig) -> list[MCEstimate]:
    if cfg.estimator is Estimator.DIRECT:
        return [estimate_direct(cfg)]
    if cfg.estimator is Estimator.MALLIAVIN:
        return [estimate_malliavin(cfg)]
    return list(estimate_both(cfg))


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not (value > 0.0):
            raise ValueError(f"{name} must be positive, got {value}")


def black_scholes_oracle(
    s0: float,
    strike: float,
    r: float,
    sigma: float,
    t: float,
) -> float:
    """Price of the call-plus-binary payoff under constant volatility."""
    _check_positive(s0=s0, strike=strike, r=r, sigma=sigma, t=t)
    vol_sqrt_t = sigma * math.sqrt(t)
    d1 = (math.log(s0 / strike) + (r + 0.5 * sigma * sigma) * t) / vol_sqrt_t
    d2 = d1 - vol_sqrt_t
    discount = math.exp(-r * t)
    call = s0 * stats.norm.cdf(d1) - strike * discount * stats.norm.cdf(d2)
    return float(call + discount * stats.norm.cdf(d2))


def black_scholes_quadrature(
    s0: float,
    strike: float,
    r: float,
    sigma: float,
    t: float,
) -> float:
    """Same price by integrating the payoff against the lognormal terminal law."""
    _check_positive(s0=s0, strike=strike, r=r, sigma=sigma, t=t)
    drift = (r - 0.5 * sigma * sigma) * t
    vol_sqrt_t = sigma * math.sqrt(t)
    threshold = (math.log(strike / s0) - drift) / vol_sqrt_t

    def integrand(g: float) -> float:
        # density folded into each exponent: exp stays finite for any g
        half_g2 = 0.5 * g * g
        terminal = s0 * math.exp(drift + vol_sqrt_t * g - half_g2)
        return (terminal + (1.0 - strike) * math.exp(-half_g2)) / SQRT_TWO_PI

    value, _error = integrate.quad(
        integrand, threshold, math.inf, epsabs=1e-13, epsrel=1e-12
    )
    return math.exp(-r * t) * value
