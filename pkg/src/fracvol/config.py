from __future__ import (
    annotations,
)

import dataclasses
import json
from dataclasses import (
    dataclass,
)
from enum import (
    Enum,
)
from pathlib import (
    Path,
)
from typing import (
    Any,
    Mapping,
)

from fracvol.dynamics import (
    DriftSpec,
    RegularizedZConfig,
    StockScheme,
    VolFunction,
    VolKind,
    default_epsilon,
)
from fracvol.dynamics.noise import (
    MAX_SEED,
)
from fracvol.fbm import (
    FbmScheme,
    KernelWeights,
    kernel_weights,
)
from fracvol.fbm.types import (
    HurstParam,
    TimeGrid,
)


class ConfigError(ValueError):
    pass


class Model(str, Enum):
    OU = "ou"
    FCIR = "fcir"
    FCIR_TV = "fcir-tv"
    FIGURE = "figure"


class Estimator(str, Enum):
    DIRECT = "direct"
    MALLIAVIN = "malliavin"
    BOTH = "both"

    def includes_malliavin(self) -> bool:
        return self is not Estimator.DIRECT


class FreezeMode(str, Enum):
    AUTO = "auto"
    ON = "on"
    OFF = "off"


ENUM_FIELDS: dict[str, type[Enum]] = {
    "model": Model,
    "sigma": VolKind,
    "estimator": Estimator,
    "fbm_scheme": FbmScheme,
    "stock_scheme": StockScheme,
    "freeze": FreezeMode,
}

INT_FIELDS = ("steps", "sims", "trials", "seed", "threads")

EPSILON_AUTO = "auto"


@dataclass(frozen=True)
class RunConfig:
    """
    One simulation run. Defaults are the Table 1 setting (fCIR drift, H = 1/2,
    sigma(y) = sqrt(y + 0.1)) with S0 = K = 1.
    `epsilon` None means "auto": 0.01 for H <= 1/2 and 0 above.
    """

    model: Model = Model.FCIR
    hurst: float = 0.5
    epsilon: float | None = None
    nu: float = 2.0
    theta: float = 0.6
    mu: float = 0.1
    kappa: float = 1.0
    c: float = 0.02
    sigma: VolKind = VolKind.SQRT_SHIFT
    sigma_a: float = 0.1
    sigma_b: float = 0.0
    eta: float = 0.2
    rate: float = 0.2
    rho: float = 0.5
    spot: float = 1.0
    strike: float = 1.0
    horizon: float = 1.0
    steps: int = 500
    sims: int = 500
    trials: int = 100
    seed: int = 20231
    estimator: Estimator = Estimator.DIRECT
    threads: int = 1
    z0: float = 1.0
    fbm_scheme: FbmScheme = FbmScheme.VOLTERRA
    stock_scheme: StockScheme = StockScheme.EULER
    freeze: FreezeMode = FreezeMode.AUTO

    def __post_init__(self) -> None:
        if not (0.0 < self.hurst < 1.0):
            raise ConfigError(f"hurst must lie in (0, 1), got {self.hurst}")
        for name in ("steps", "sims", "trials", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(
                    f"{name} must be at least 1, got {getattr(self, name)}"
                )
        if not (0 <= self.seed <= MAX_SEED):
            raise ConfigError(f"seed must lie in 0..2^64-1, got {self.seed}")
        if not (-1.0 <= self.rho <= 1.0):
            raise ConfigError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.horizon <= 0.0 or self.spot <= 0.0 or self.strike <= 0.0:
            raise ConfigError(
                "horizon, spot and strike must be positive, got "
                f"{self.horizon}, {self.spot}, {self.strike}"
            )
        if self.epsilon is not None and self.epsilon < 0.0:
            raise ConfigError(f"epsilon must be nonnegative, got {self.epsilon}")
        try:
            self.z_config().check_epsilon_policy(self.hurst_param)
            vol = self.vol()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if self.estimator.includes_malliavin():
            if abs(self.rho) == 1.0:
                raise ConfigError("The Malliavin estimator needs |rho| < 1")
            if vol.is_zero:
                raise ConfigError(
                    "The Malliavin weight is undefined for zero volatility"
                )

    def __repr__(self) -> str:
        return f"RunConfig({json.dumps(self.to_echo(), sort_keys=True)})"

    @property
    def resolved_epsilon(self) -> float:
        if self.epsilon is None:
            return default_epsilon(self.hurst_param)
        return self.epsilon

    @property
    def hurst_param(self) -> HurstParam:
        return HurstParam(self.hurst)

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.horizon, self.steps)

    @property
    def freezes(self) -> bool:
        if self.freeze is FreezeMode.AUTO:
            return self.model is not Model.OU
        return self.freeze is FreezeMode.ON

    def drift(self) -> DriftSpec:
        if self.model is Model.OU:
            return DriftSpec.ornstein_uhlenbeck(self.theta)
        if self.model is Model.FCIR:
            return DriftSpec.standard_fcir(self.mu, self.theta)
        if self.model is Model.FCIR_TV:
            return DriftSpec.time_varying(self.nu, self.theta, self.c)
        return DriftSpec.figure(self.nu, self.kappa, self.c)

    def vol(self) -> VolFunction:
        return VolFunction(self.sigma, self.sigma_a, self.sigma_b)

    def z_config(self) -> RegularizedZConfig:
        return RegularizedZConfig(
            self.drift(), self.resolved_epsilon, self.nu, self.z0, self.freezes
        )

    def weights(self) -> KernelWeights:
        return kernel_weights(self.hurst_param, self.grid, self.fbm_scheme)

    def replace(self, **changes: Any) -> RunConfig:  # noqa: ANN401
        return dataclasses.replace(self, **changes)

    def to_echo(self) -> dict[str, Any]:
        echo: dict[str, Any] = {}
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            echo[field.name] = value.value if isinstance(value, Enum) else value
        echo["epsilon"] = EPSILON_AUTO if self.epsilon is None else self.epsilon
        echo["epsilon_resolved"] = self.resolved_epsilon
        return echo

    @classmethod
    def from_dict(
        cls,
        values: Mapping[str, Any],
        base: RunConfig | None = None,
    ) -> RunConfig:
        """
        Overlay `values` (RunConfig field names, kebab-case accepted) on `base`.
        Unknown keys are rejected; `epsilon_resolved` from an echo is ignored.
        """
        known = {field.name for field in dataclasses.fields(cls)}
        changes: dict[str, Any] = {}
        for raw_key, value in values.items():
            key = raw_key.replace("-", "_")
            if key == "epsilon_resolved":
                continue
            if key not in known:
                raise ConfigError(f"Unknown configuration key '{raw_key}'")
            changes[key] = _coerce(key, value)
        try:
            return dataclasses.replace(base or cls(), **changes)
        except TypeError as e:
            raise ConfigError(str(e)) from e


def _coerce(key: str, value: Any) -> Any:  # noqa: ANN401 typing.Any disallowed
    if key in ENUM_FIELDS:
        try:
            return ENUM_FIELDS[key](value)
        except ValueError as e:
            choices = ", ".join(member.value for member in ENUM_FIELDS[key])
            raise ConfigError(f"Invalid {key} '{value}' (choose from {choices})") from e
    if key == "epsilon":
        if value is None or value == EPSILON_AUTO:
            return None
        return _number(key, value)
    if key in INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value
    return _number(key, value)


def _number(key: str, value: Any) -> float:  # noqa: ANN401 typing.Any disallowed
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    return float(value)


def load_config_file(path: Path) -> dict[str, Any]:
    try:
        values = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(values, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return values
