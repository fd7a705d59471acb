import json
from pathlib import (
    Path,
)

import pytest

from fracvol.config import (
    ConfigError,
    Estimator,
    FreezeMode,
    Model,
    RunConfig,
    load_config_file,
)
from fracvol.dynamics import (
    DriftKind,
    StockScheme,
    VolKind,
)
from fracvol.fbm import (
    FbmScheme,
)


def test_defaults() -> None:
    cfg = RunConfig()
    assert cfg.model is Model.FCIR
    assert cfg.steps == 500
    assert cfg.sims == 500
    assert cfg.trials == 100
    assert cfg.rho == 0.5
    assert cfg.fbm_scheme is FbmScheme.VOLTERRA
    assert cfg.stock_scheme is StockScheme.EULER


def test_auto_epsilon() -> None:
    assert RunConfig(hurst=0.3).resolved_epsilon == 0.01
    assert RunConfig(hurst=0.5).resolved_epsilon == 0.01
    assert RunConfig(hurst=0.7).resolved_epsilon == 0.0
    assert RunConfig(hurst=0.7, epsilon=0.05).resolved_epsilon == 0.05


@pytest.mark.parametrize(
    "changes, message",
    [
        ({"hurst": 1.0}, "hurst"),
        ({"steps": 0}, "steps"),
        ({"sims": 0}, "sims"),
        ({"threads": 0}, "threads"),
        ({"seed": -1}, "seed"),
        ({"rho": 1.5}, "rho"),
        ({"strike": 0.0}, "strike"),
        ({"epsilon": -0.1}, "epsilon"),
        ({"epsilon": 0.0, "hurst": 0.5}, "epsilon = 0"),
        ({"hurst": 0.7, "freeze": FreezeMode.OFF}, "without freezing"),
        ({"hurst": 0.9, "epsilon": 0.0, "freeze": FreezeMode.OFF}, "freeze=on"),
        ({"nu": -1.0}, "Vol-of-vol"),
        ({"z0": 0.0}, "z0"),
        ({"theta": 0.0}, "theta"),
        ({"sigma": VolKind.AFFINE, "sigma_b": 0.0}, "Affine"),
        ({"estimator": Estimator.MALLIAVIN, "rho": 1.0}, r"\|rho\| < 1"),
        ({"estimator": Estimator.BOTH, "rho": -1.0}, r"\|rho\| < 1"),
        (
            {
                "estimator": Estimator.MALLIAVIN,
                "sigma": VolKind.CONSTANT,
                "sigma_a": 0.0,
            },
            "zero volatility",
        ),
    ],
)
def test_validation(changes: dict, message: str) -> None:
    with pytest.raises(ConfigError, match=message):
        RunConfig(**changes)


def test_direct_estimator_allows_full_correlation() -> None:
    assert RunConfig(rho=1.0).rho == 1.0


def test_drift_per_model() -> None:
    assert RunConfig(model=Model.OU).drift().kind is DriftKind.ORNSTEIN_UHLENBECK
    assert RunConfig(model=Model.FCIR).drift().mu == 0.1
    tv = RunConfig(model=Model.FCIR_TV, nu=0.4, theta=1.0, c=0.02).drift()
    assert tv.kind is DriftKind.TIME_VARYING
    assert tv.nu == 0.4
    figure = RunConfig(model=Model.FIGURE, nu=0.1, c=2.0).drift()
    assert figure.sigma == 0.1
    assert figure.kappa == 1.0


def test_freeze_mode() -> None:
    assert RunConfig().freezes
    assert not RunConfig(model=Model.OU, theta=0.6).freezes
    assert RunConfig(model=Model.OU, freeze=FreezeMode.ON).freezes
    assert not RunConfig(freeze=FreezeMode.OFF).z_config().freeze


def test_unfrozen_runs_need_regularisation_or_ou_drift() -> None:
    assert RunConfig(hurst=0.7, epsilon=0.01, freeze=FreezeMode.OFF).resolved_epsilon
    ou = RunConfig(model=Model.OU, hurst=0.7, theta=0.6, freeze=FreezeMode.OFF)
    assert ou.resolved_epsilon == 0.0
    assert not ou.freezes


def test_echo_round_trip() -> None:
    cfg = RunConfig(
        model=Model.FCIR_TV,
        hurst=0.3,
        nu=0.4,
        theta=1.0,
        sigma=VolKind.SQRT_QUAD,
        sigma_a=1.0,
    )
    echo = json.loads(json.dumps(cfg.to_echo()))
    assert echo["epsilon"] == "auto"
    assert echo["epsilon_resolved"] == 0.01
    assert echo["model"] == "fcir-tv"
    assert RunConfig.from_dict(echo) == cfg


def test_from_dict_overlays_base() -> None:
    base = RunConfig(hurst=0.7, sims=10)
    cfg = RunConfig.from_dict({"sims": 20, "sigma-a": 0.3, "estimator": "both"}, base)
    assert cfg.hurst == 0.7
    assert cfg.sims == 20
    assert cfg.sigma_a == 0.3
    assert cfg.estimator is Estimator.BOTH


@pytest.mark.parametrize(
    "values, message",
    [
        ({"unknown": 1}, "Unknown configuration key"),
        ({"model": "heston"}, "Invalid model"),
        ({"steps": 10.5}, "integer"),
        ({"steps": True}, "integer"),
        ({"hurst": "high"}, "number"),
    ],
)
def test_from_dict_rejects(values: dict, message: str) -> None:
    with pytest.raises(ConfigError, match=message):
        RunConfig.from_dict(values)


def test_replace_validates() -> None:
    with pytest.raises(ConfigError):
        RunConfig().replace(steps=0)


def test_load_config_file(tmp_path: Path) -> None:
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"hurst": 0.7, "seed": 3}), encoding="utf-8")
    assert load_config_file(path) == {"hurst": 0.7, "seed": 3}

    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config_file(path)

    path.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config_file(path)


def test_weights_follow_config() -> None:
    cfg = RunConfig(hurst=0.7, steps=16, fbm_scheme=FbmScheme.VOLTERRA)
    weights = cfg.weights()
    assert weights.grid.n_steps == 16
    assert weights.hurst.h == 0.7
    assert not weights.uses_residual
