from __future__ import (
    annotations,
)

import math

import numpy as np
import numpy.typing as npt
from scipy import (
    integrate,
    special,
)

from fracvol.fbm.types import (
    HurstParam,
)

SERIES_MAX_TERMS = 1_000_000
SERIES_TOLERANCE = 1e-14


class HypergeometricDomainError(ValueError):
    pass


class NonConvergenceError(ArithmeticError):
    pass


def _is_nonpositive_integer(value: float) -> bool:
    return bool(value <= 0) and float(value).is_integer()


def _gauss_series(a: float, b: float, c: float, z: float) -> float:
    total = 1.0
    term = 1.0
    for k in range(SERIES_MAX_TERMS):
        ratio = (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        term *= ratio
        total += term
        if term == 0.0:
            return total
        if abs(ratio) < 1.0 and abs(term) <= SERIES_TOLERANCE * abs(total):
            return total
    raise NonConvergenceError(
        f"2F1({a}, {b}; {c}; {z}) series did not converge in {SERIES_MAX_TERMS} terms"
    )


def gauss_2f1(a: float, b: float, c: float, x: float) -> float:
    """
    Gauss hypergeometric function for x < 1.
    Negative arguments go through the Pfaff transformation
    2F1(a, b; c; x) = (1 - x)^-a 2F1(a, c - b; c; x / (x - 1)),
    which maps them into [0, 1) where the Gauss series converges.
    """
    if _is_nonpositive_integer(c):
        raise HypergeometricDomainError(f"c={c} is a pole of 2F1")
    if not (x < 1.0):
        raise HypergeometricDomainError(f"2F1 argument must be < 1, got {x}")
    if x == 0.0 or a == 0.0 or b == 0.0:
        return 1.0
    if x > 0.0:
        return _gauss_series(a, b, c, x)
    z = x / (x - 1.0)
    return (1.0 - x) ** (-a) * _gauss_series(a, c - b, c, z)


def gauss_2f1_euler(a: float, b: float, c: float, x: float) -> float:
    """
    Euler integral representation of 2F1, evaluated by adaptive quadrature:
    Gamma(c) / (Gamma(b) Gamma(c - b)) * int_0^1 u^(b-1) (1-u)^(c-b-1) (1-xu)^-a du.
    Needs c > b > 0 (or c > a > 0, the function being symmetric in a and b).
    """
    if not (c > b > 0.0):
        a, b = b, a
    if not (c > b > 0.0):
        raise HypergeometricDomainError(
            "Euler integral needs c > b > 0 for one ordering of (a, b), "
            f"got {a}, {b}, {c}"
        )
    if not (x < 1.0):
        raise HypergeometricDomainError(f"2F1 argument must be < 1, got {x}")
    value, _error = integrate.quad(
        lambda u: (1.0 - x * u) ** (-a),
        0.0,
        1.0,
        weight="alg",
        wvar=(b - 1.0, c - b - 1.0),
        epsabs=1e-14,
        epsrel=1e-13,
        limit=200,
    )
    log_norm = special.gammaln(c) - special.gammaln(b) - special.gammaln(c - b)
    return float(math.exp(log_norm) * value)


def kernel_variance_factor(hurst: HurstParam) -> float:
    """
    V_H such that the hypergeometric kernel integrates to V_H * t^(2H) in square.
    """
    h = hurst.h
    if hurst.is_brownian:
        return 1.0
    numerator = special.gamma(2.0 - 2.0 * h) * math.cos(math.pi * h)
    return float(numerator / (math.pi * h * (1.0 - 2.0 * h)))


def kernel_values(
    hurst: HurstParam,
    t: float,
    s: npt.NDArray[np.float64],
    gap: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """
    Vectorised kernel for 0 < s < t, with gap = t - s passed separately so that
    points close to the diagonal keep their relative precision.
    """
    h = hurst.h
    hyp = special.hyp2f1(h - 0.5, 0.5 - h, h + 0.5, -gap / s)
    return np.power(gap, h - 0.5) / special.gamma(h + 0.5) * hyp


def kernel(hurst: HurstParam, t: float, s: float) -> float:
    if not (t > 0.0) or not (s > 0.0):
        raise ValueError(f"Kernel is defined for t > 0 and s > 0, got t={t}, s={s}")
    if s >= t:
        return 0.0
    value = kernel_values(hurst, t, np.array([s]), np.array([t - s]))
    return float(value[0])
