"""
Driving noise of the model.

Every standard normal is a pure function of (master seed, stream, path index):
a Philox generator is keyed by (seed, stream) and its counter starts at the path
index, so a path draws the same numbers whichever batch or worker computes it.
"""
from __future__ import (
    annotations,
)

import math
from dataclasses import (
    dataclass,
)
from enum import (
    IntEnum,
)

import numpy as np
import numpy.typing as npt
from scipy import (
    special,
)

from fracvol.fbm import (
    KernelWeights,
    fbm_paths,
)
from fracvol.fbm.types import (
    HurstParam,
    TimeGrid,
)

FloatArray = npt.NDArray[np.float64]

MAX_SEED = 2**64 - 1

# smallest uniform fed to the inverse normal CDF, keeps draws finite
UNIFORM_FLOOR = float(np.finfo(np.float64).tiny)


class Stream(IntEnum):
    V = 0
    V_TILDE = 1
    RESIDUAL = 2


def path_generator(seed: int, stream: Stream, path_index: int) -> np.random.Generator:
    if not (0 <= seed <= MAX_SEED):
        raise ValueError(f"Seed must lie in 0..2^64-1, got {seed}")
    if path_index < 0:
        raise ValueError(f"Path index must be nonnegative, got {path_index}")
    key = np.array([seed, int(stream)], dtype=np.uint64)
    # the path index sits in the third counter word, draws advance the first one
    counter = np.array([0, 0, path_index, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def standard_normals(
    seed: int,
    stream: Stream,
    first_path: int,
    n_paths: int,
    size: int,
) -> FloatArray:
    """Inverse-CDF normals, one row of `size` draws per path index."""
    draws = np.empty((n_paths, size), dtype=np.float64)
    for row in range(n_paths):
        uniforms = path_generator(seed, stream, first_path + row).random(size)
        np.maximum(uniforms, UNIFORM_FLOOR, out=uniforms)
        draws[row] = special.ndtri(uniforms)
    return draws


@dataclass(frozen=True, eq=False)
class PathBundle:
    """
    Driving increments of `n_paths` consecutive paths starting at `path_index`.
    Row k of every array belongs to path `path_index + k`; dv[:, q] is the
    increment of V over [t_q, t_{q+1}] and wh[:, q] is W^H(t_q).
    """

    grid: TimeGrid
    rho: float
    dv: FloatArray
    dvt: FloatArray
    db: FloatArray
    wh: FloatArray
    residual: FloatArray | None
    seed: int
    path_index: int

    @property
    def n_paths(self) -> int:
        return int(self.dv.shape[0])

    def select(self, row: int) -> PathBundle:
        """Single-path bundle for one row of this batch."""
        if not (0 <= row < self.n_paths):
            raise IndexError(f"Row {row} outside 0..{self.n_paths - 1}")
        return PathBundle(
            self.grid,
            self.rho,
            self.dv[row : row + 1],
            self.dvt[row : row + 1],
            self.db[row : row + 1],
            self.wh[row : row + 1],
            None if self.residual is None else self.residual[row : row + 1],
            self.seed,
            self.path_index + row,
        )


def check_rho(rho: float) -> None:
    if not (-1.0 <= rho <= 1.0):
        raise ValueError(f"Correlation must lie in [-1, 1], got {rho}")


def assemble_bundle(
    weights: KernelWeights,
    rho: float,
    dv: FloatArray,
    dvt: FloatArray,
    residual: FloatArray | None = None,
    seed: int = 0,
    path_index: int = 0,
) -> PathBundle:
    """
    Bundle from given increments: B = rho V + sqrt(1 - rho^2) V~ and W^H
    synthesised from V. Used for fresh draws and for bumped copies of a path.
    """
    check_rho(rho)
    if dv.shape != dvt.shape:
        raise ValueError(f"Increment shapes differ: {dv.shape} vs {dvt.shape}")
    db = rho * dv + math.sqrt(1.0 - rho * rho) * dvt
    wh = fbm_paths(weights, dv, residual)
    return PathBundle(weights.grid, rho, dv, dvt, db, wh, residual, seed, path_index)


def correlated_bundle(
    grid: TimeGrid,
    rho: float,
    hurst: HurstParam,
    weights: KernelWeights,
    seed: int,
    path_index: int,
    n_paths: int = 1,
) -> PathBundle:
    check_rho(rho)
    if weights.grid != grid or weights.hurst != hurst:
        raise ValueError(
            f"{weights!r} does not match grid N={grid.n_steps}, "
            f"T={grid.t_end} and {hurst}"
        )
    if n_paths < 1:
        raise ValueError(f"Bundle needs at least one path, got {n_paths}")
    n = grid.n_steps
    scale = math.sqrt(grid.dt)
    dv = scale * standard_normals(seed, Stream.V, path_index, n_paths, n)
    dvt = scale * standard_normals(seed, Stream.V_TILDE, path_index, n_paths, n)
    residual = None
    if weights.uses_residual:
        residual = standard_normals(seed, Stream.RESIDUAL, path_index, n_paths, n + 1)
    return assemble_bundle(weights, rho, dv, dvt, residual, seed, path_index)
