import math

import numpy as np
import pytest

from fracvol.config import (
    ConfigError,
    Estimator,
    Model,
)
from fracvol.dynamics import (
    VolKind,
)
from fracvol.experiments import (
    FIGURE_PATHS,
    PUBLISHED,
    TABLE_HURSTS,
    TABLE_VOLS,
    figure_config,
    ou_config,
    preset_config,
    run_table,
    sample_paths,
    table_config,
    terminal_variance,
)


def test_figure_presets() -> None:
    cfg = figure_config("2.2")
    assert cfg.model is Model.FIGURE
    assert cfg.hurst == 0.5
    assert cfg.resolved_epsilon == 0.01
    assert cfg.sims == FIGURE_PATHS
    assert cfg.sigma is VolKind.AFFINE
    assert figure_config("2.4").hurst == 0.9
    assert figure_config("2.4").resolved_epsilon == 0.0
    with pytest.raises(ConfigError, match="Unknown figure"):
        figure_config("3.1")


def test_table_presets() -> None:
    assert table_config(1).estimator is Estimator.DIRECT
    assert table_config(2).estimator is Estimator.MALLIAVIN
    assert table_config(3).estimator is Estimator.DIRECT
    assert table_config(4).estimator is Estimator.MALLIAVIN
    assert table_config(1).model is Model.FCIR
    assert table_config(1).nu == 2.0
    assert table_config(4).model is Model.FCIR_TV
    assert table_config(4).nu == 0.4
    with pytest.raises(ConfigError, match="Unknown table"):
        table_config(5)


def test_published_values() -> None:
    for rows in PUBLISHED.values():
        assert len(rows) == len(TABLE_VOLS)
        assert all(len(row) == len(TABLE_HURSTS) for row in rows)
    assert PUBLISHED[1][0][0] == (0.774185342, 0.062159457)
    assert PUBLISHED[4][1][4][0] == 0.88152163


def test_preset_config() -> None:
    assert preset_config("table3") == table_config(3)
    assert preset_config("figure2.3") == figure_config("2.3")
    assert preset_config("ou") == ou_config()
    assert not ou_config().freezes
    with pytest.raises(ConfigError, match="Unknown preset"):
        preset_config("table9")


def test_sample_paths() -> None:
    cfg = figure_config("2.1").replace(steps=50, sims=3)
    paths = sample_paths(cfg)
    assert paths.stock.s.shape == (3, 51)
    assert paths.zpath.z.shape == (3, 51)
    assert paths.bundle.wh.shape == (3, 51)
    np.testing.assert_allclose(paths.stock.s[:, 0], 100.0)
    np.testing.assert_allclose(paths.zpath.z[:, 0], 1.0)
    again = sample_paths(cfg)
    np.testing.assert_array_equal(paths.stock.s, again.stock.s)


def test_run_table_at_small_scale() -> None:
    cells = run_table(1, {"steps": 10, "sims": 16, "trials": 2})
    assert len(cells) == len(TABLE_VOLS) * len(TABLE_HURSTS)
    assert [cell.hurst for cell in cells[:5]] == list(TABLE_HURSTS)
    assert cells[0].sigma == "sqrt(y+0.1)"
    assert cells[0].paper_mean == 0.774185342
    assert all(math.isfinite(cell.mean) for cell in cells)
    assert cells[0].mean_gap == pytest.approx(cells[0].mean - 0.774185342)


def test_run_table_rejects_bad_overrides() -> None:
    with pytest.raises(ConfigError):
        run_table(1, {"sims": 0})


def test_terminal_variance() -> None:
    paths = np.zeros((4, 3))
    paths[:, -1] = [1.0, -1.0, 1.0, -1.0]
    variance, std_err = terminal_variance(paths)
    assert variance == pytest.approx(4.0 / 3.0)
    assert std_err == 0.0
