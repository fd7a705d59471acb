from typing import (
    Callable,
)

import pytest

from fracvol.fbm.types import (
    HurstParam,
    TimeGrid,
)
from fracvol.verify import (
    FAST_CHECKS,
    FULL_CHECKS,
    Level,
    check_black_scholes,
    check_black_scholes_estimators,
    check_cholesky,
    check_covariance,
    check_degeneracy,
    check_epsilon_convergence,
    check_estimator_agreement,
    check_fd_x,
    check_fd_z,
    check_hypergeometric,
    check_kernel,
    check_payoff,
    check_positivity,
    check_published_cells,
    check_terminal_variance,
    covariance_gaps,
    relative_gap,
    run_checks,
)


def test_relative_gap() -> None:
    assert relative_gap(1.01, 1.0) == pytest.approx(0.01)
    assert relative_gap(1e-5, 0.0, floor=1e-3) == pytest.approx(0.01)


def test_covariance_gaps_at_half() -> None:
    late, overall = covariance_gaps(HurstParam(0.5), TimeGrid(1.0, 16))
    assert late <= 1e-12
    assert overall <= 1e-12


@pytest.mark.parametrize(
    "check",
    [
        check_degeneracy,
        check_hypergeometric,
        check_kernel,
        check_covariance,
        check_cholesky,
        check_payoff,
        check_black_scholes,
        check_fd_z,
        check_fd_x,
        check_epsilon_convergence,
    ],
)
def test_fast_check_passes(check: Callable[[], tuple[bool, str]]) -> None:
    passed, message = check()
    assert passed, message


@pytest.mark.slow
@pytest.mark.parametrize(
    "check",
    [
        check_terminal_variance,
        check_positivity,
        check_black_scholes_estimators,
        check_estimator_agreement,
        check_published_cells,
    ],
)
def test_full_check_passes(check: Callable[[], tuple[bool, str]]) -> None:
    passed, message = check()
    assert passed, message


def test_check_registries() -> None:
    assert set(FAST_CHECKS).isdisjoint(FULL_CHECKS)
    assert len(FAST_CHECKS) == 10
    assert len(FULL_CHECKS) == 5


def test_run_checks_reports_failures(monkeypatch: pytest.MonkeyPatch) -> None:
    def broken() -> tuple[bool, str]:
        raise RuntimeError("no convergence")

    checks = {
        "good": lambda: (True, "fine"),
        "bad": lambda: (False, "off by 10%"),
        "broken": broken,
    }
    monkeypatch.setattr("fracvol.verify.FAST_CHECKS", checks)
    monkeypatch.setattr("fracvol.verify.FULL_CHECKS", {"slow": lambda: (True, "fine")})

    results = run_checks(Level.FAST)
    assert [r.name for r in results] == ["good", "bad", "broken"]
    assert [r.passed for r in results] == [True, False, False]
    assert results[2].message == "RuntimeError: no convergence"
    assert all(r.seconds >= 0.0 for r in results)

    assert [r.name for r in run_checks(Level.FULL)] == ["good", "bad", "broken", "slow"]
