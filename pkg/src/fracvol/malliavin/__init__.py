"""
Pathwise Malliavin derivatives on the simulation grid.

Indices follow the grid: `t_index` is a grid point 0..N and `u_index` a cell
1..N, the cell [t_{u-1}, t_u] whose driving increment is perturbed. The Z equation
carries a factor 1/2 on its drift, so every linearisation uses F/2 where the
continuous formulas show F. Inner integrals use the left-point rule.
"""
from __future__ import (
    annotations,
)

import dataclasses
import math
from dataclasses import (
    dataclass,
)

import numpy as np
import numpy.typing as npt

from fracvol.dynamics import (
    DriftSpec,
    Real,
    RegularizedZConfig,
    StockScheme,
    VolFunction,
    ZPath,
    lambda_eps,
    lambda_eps_prime,
    simulate_stock,
    simulate_z,
)
from fracvol.dynamics.noise import (
    PathBundle,
    assemble_bundle,
)
from fracvol.fbm import (
    KernelWeights,
)
from fracvol.fbm.types import (
    TimeGrid,
)

FloatArray = npt.NDArray[np.float64]

FD_DELTA = 1e-4


@dataclass(frozen=True)
class MalliavinCoefficient:
    drift: DriftSpec
    epsilon: float


def coefficient_F(mc: MalliavinCoefficient, t: float, z: Real) -> Real:  # noqa: N802
    """F_eps(t, z) = f_z(t, z) Lambda_eps(z) + f(t, z) Lambda'_eps(z)"""
    return mc.drift.df_dz(t, z) * lambda_eps(z, mc.epsilon) + mc.drift.f(
        t, z
    ) * lambda_eps_prime(z, mc.epsilon)


def coefficient_F_limit(drift: DriftSpec, t: float, z: float) -> float:  # noqa: N802
    if not (z > 0.0):
        raise ValueError(f"The epsilon -> 0 limit is defined for z > 0, got {z}")
    return drift.df_dz(t, z) / z - drift.f(t, z) / (z * z)


def _check_indices(u_index: int, t_index: int, grid: TimeGrid) -> None:
    if not (1 <= u_index <= grid.n_steps):
        raise IndexError(f"Derivative time index {u_index} outside 1..{grid.n_steps}")
    grid.check_index(t_index)


def _stopped(zpath: ZPath, path: int, t_index: int) -> bool:
    tau = int(zpath.tau_index[path])
    return tau >= 0 and t_index >= tau


def _half_f_dt(
    mc: MalliavinCoefficient,
    zpath: ZPath,
    grid: TimeGrid,
    path: int,
    start: int,
    stop: int,
) -> FloatArray:
    """(1/2) F_eps(t_k, z_k) dt for k = start..stop-1."""
    times = grid.points[start:stop]
    z = zpath.z[path, start:stop]
    values = np.array(
        [coefficient_F(mc, float(t), float(zk)) for t, zk in zip(times, z)],
        dtype=np.float64,
    )
    return 0.5 * grid.dt * values


def dW_z(  # noqa: N802
    u_index: int,
    t_index: int,
    zpath: ZPath,
    mc: MalliavinCoefficient,
    nu: float,
    grid: TimeGrid,
    path: int = 0,
) -> float:
    _check_indices(u_index, t_index, grid)
    if u_index > t_index or _stopped(zpath, path, t_index):
        return 0.0
    exponent = math.fsum(_half_f_dt(mc, zpath, grid, path, u_index, t_index))
    return 0.5 * nu * math.exp(exponent)


def dV_z(  # noqa: N802
    u_index: int,
    t_index: int,
    zpath: ZPath,
    mc: MalliavinCoefficient,
    nu: float,
    weights: KernelWeights,
    path: int = 0,
) -> float:
    grid = weights.grid
    _check_indices(u_index, t_index, grid)
    if zpath.z.shape[1] != grid.n_steps + 1:
        raise ValueError(f"Path length {zpath.z.shape[1]} does not match {weights!r}")
    if u_index > t_index or _stopped(zpath, path, t_index):
        return 0.0
    if u_index == t_index:
        return 0.5 * nu * weights.entry(t_index, u_index)

    half_f =_half_f_dt(mc, zpath, grid, path, u_index, t_index)
    # tail[m] = sum of half_f[m + 1:], the exponent from k + 1 to t - 1
    tail = np.concatenate([np.cumsum(half_f[::-1])[::-1][1:], [0.0]])
    kernel = weights.c[u_index - 1 : t_index - 1, u_index - 1]
    correction = math.fsum(kernel * half_f * np.exp(tail))
    return 0.5 * nu * (weights.entry(t_index, u_index) + correction)


def dVtilde_x(  # noqa: N802
    u_index: int,
    rho: float,
    sigma_of_y: VolFunction,
    zpath: ZPath,
    path: int = 0,
) -> float:
    if not (-1.0 < rho < 1.0):
        raise ValueError(f"The V~ channel vanishes for |rho| = 1, got rho={rho}")
    n = zpath.z.shape[1] - 1
    if not (1 <= u_index <= n):
        raise IndexError(f"Derivative time index {u_index} outside 1..{n}")
    y = float(zpath.y[path, u_index - 1])
    return math.sqrt(1.0 - rho * rho) * float(sigma_of_y.sigma(y))


def dS_dVtilde(  # noqa: N802
    u_index: int,
    rho: float,
    sigma_of_y: VolFunction,
    zpath: ZPath,
    s_terminal: float,
    path: int = 0,
) -> float:
    return s_terminal * dVtilde_x(u_index, rho, sigma_of_y, zpath, path)


def _volatility_channel(
    u_index: int,
    t_index: int,
    zpath: ZPath,
    mc: MalliavinCoefficient,
    nu: float,
    weights: KernelWeights,
    sigma_of_y: VolFunction,
    db: FloatArray,
    path: int,
) -> float:
    """sum over n in [u, t) of sigma'(Y_n) D_u Y_n (dB_n - sigma(Y_n) dt)"""
    dt = weights.grid.dt
    terms = []
    for n in range(u_index, t_index):
        dz = dV_z(u_index, n, zpath, mc, nu, weights, path)
        dy = 2.0 * float(zpath.z[path, n]) * dz
        if dy == 0.0:
            continue
        y = float(zpath.y[path, n])
        slope = float(sigma_of_y.sigma_prime(y))
        drift = float(sigma_of_y.sigma(y)) * dt
        terms.append(slope * dy * (float(db[n]) - drift))
    return math.fsum(terms)


def dB_x(  # noqa: N802
    u_index: int,
    t_index: int,
    zpath: ZPath,
    bundle: PathBundle,
    mc: MalliavinCoefficient,
    nu: float,
    weights: KernelWeights,
    sigma_of_y: VolFunction,
    path: int = 0,
) -> float:
    """
    Volatility part of D^B_u X_t, with D^B Y = 2 Z D^B Z and D^B Z evaluated
    through the kernel as for V.
    """
    _check_indices(u_index, t_index, weights.grid)
    if u_index > t_index:
        return 0.0
    return _volatility_channel(
        u_index, t_index, zpath, mc, nu, weights, sigma_of_y, bundle.db[path], path
    )


def dV_x(  # noqa: N802
    u_index: int,
    t_index: int,
    zpath: ZPath,
    bundle: PathBundle,
    mc: MalliavinCoefficient,
    nu: float,
    weights: KernelWeights,
    sigma_of_y: VolFunction,
    path: int = 0,
) -> float:
    """D^V_u X_t: the direct rho sigma(Y_u) term plus the volatility channel."""
    _check_indices(u_index, t_index, weights.grid)
    if u_index > t_index:
        return 0.0
    direct = bundle.rho * float(sigma_of_y.sigma(float(zpath.y[path, u_index - 1])))
    return direct + _volatility_channel(
        u_index, t_index, zpath, mc, nu, weights, sigma_of_y, bundle.db[path], path
    )


@dataclass(frozen=True)
class PathSetup:
    """Everything needed to re-simulate one path under bumped noise."""

    zcfg: RegularizedZConfig
    weights: KernelWeights
    s0: float
    eta: float
    sigma_of_y: VolFunction

    @property
    def coefficient(self) -> MalliavinCoefficient:
        return MalliavinCoefficient(self.zcfg.drift, self.zcfg.epsilon)

    def log_price(self, bundle: PathBundle) -> float:
        zpath = simulate_z(self.zcfg, bundle)
        stock = simulate_stock(
            self.s0, self.eta, self.sigma_of_y, zpath, bundle, StockScheme.LOG_EULER
        )
        return float(stock.x[0, -1])


def _single(bundle: PathBundle) -> None:
    if bundle.n_paths != 1:
        raise ValueError(f"Finite differences run on one path, got {bundle.n_paths}")


def _rebuild(
    setup: PathSetup,
    bundle: PathBundle,
    dv: FloatArray,
    dvt: FloatArray,
) -> PathBundle:
    return assemble_bundle(
        setup.weights,
        bundle.rho,
        dv,
        dvt,
        bundle.residual,
        bundle.seed,
        bundle.path_index,
    )


def fd_dW_z(  # noqa: N802
    setup: PathSetup,
    bundle: PathBundle,
    u_index: int,
    t_index: int,
    delta: float = FD_DELTA,
) -> float:
    """Forward difference of Z_t under W^H_s -> W^H_s + delta for s >= t_u."""
    _single(bundle)
    _check_indices(u_index, t_index, bundle.grid)
    wh = bundle.wh.copy()
    wh[:, u_index:] += delta
    bumped = dataclasses.replace(bundle, wh=wh)
    base = simulate_z(setup.zcfg, bundle).z[0, t_index]
    moved = simulate_z(setup.zcfg, bumped).z[0, t_index]
    return float((moved - base) / delta)


def fd_dV_z(  # noqa: N802
    setup: PathSetup,
    bundle: PathBundle,
    u_index: int,
    t_index: int,
    delta: float = FD_DELTA,
) -> float:
    """Forward difference of Z_t under dV_u -> dV_u + delta, W^H re-synthesised."""
    _single(bundle)
    _check_indices(u_index, t_index, bundle.grid)
    dv = bundle.dv.copy()
    dv[0, u_index - 1] += delta
    base = simulate_z(setup.zcfg, _rebuild(setup, bundle, bundle.dv, bundle.dvt))
    moved = simulate_z(setup.zcfg, _rebuild(setup, bundle, dv, bundle.dvt))
    return float((moved.z[0, t_index] - base.z[0, t_index]) / delta)


def fd_dVtilde_x(  # noqa: N802
    setup: PathSetup,
    bundle: PathBundle,
    u_index: int,
    delta: float = FD_DELTA,
) -> float:
    """Forward difference of X_T under dV~_u -> dV~_u + delta (log-Euler prices)."""
    _single(bundle)
    _check_indices(u_index, bundle.grid.n_steps, bundle.grid)
    dvt = bundle.dvt.copy()
    dvt[0, u_index - 1] += delta
    base = setup.log_price(_rebuild(setup, bundle, bundle.dv, bundle.dvt))
    moved = setup.log_price(_rebuild(setup, bundle, bundle.dv, dvt))
    return (moved - base) / delta


def fd_dV_x(  # noqa: N802
    setup: PathSetup,
    bundle: PathBundle,
    u_index: int,
    delta: float = FD_DELTA,
) -> float:
    """Forward difference of X_T under dV_u -> dV_u + delta (log-Euler prices)."""
    _single(bundle)
    _check_indices(u_index, bundle.grid.n_steps, bundle.grid)
    dv = bundle.dv.copy()
    dv[0, u_index - 1] += delta
    base = setup.log_price(_rebuild(setup, bundle, bundle.dv, bundle.dvt))
    moved = setup.log_price(_rebuild(setup, bundle, dv, bundle.dvt))
    return (moved - base) / delta


def fd_dB_x(  # noqa: N802
    setup: PathSetup,
    bundle: PathBundle,
    u_index: int,
    delta: float = FD_DELTA,
) -> float:
    """
    Volatility part of the X_T response to a bump of dB_u. Needs rho = 1 so that B
    drives both the price and, through the kernel, the volatility; the direct
    sigma(Y_u) response is removed.
    """
    if bundle.rho != 1.0:
        raise ValueError(f"The dB finite difference needs rho = 1, got {bundle.rho}")
    zpath = simulate_z(setup.zcfg, _rebuild(setup, bundle, bundle.dv, bundle.dvt))
    direct = float(setup.sigma_of_y.sigma(float(zpath.y[0, u_index - 1])))
    return fd_dV_x(setup, bundle, u_index, delta) - direct
