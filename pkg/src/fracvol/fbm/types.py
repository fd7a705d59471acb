from __future__ import (
    annotations,
)

import math
from dataclasses import (
    dataclass,
)
from functools import (
    cached_property,
)

import numpy as np
import numpy.typing as npt


@dataclass(frozen=True)
class HurstParam:
    h: float

    def __post_init__(self) -> None:
        if not (0.0 < self.h < 1.0):
            raise ValueError(f"Hurst parameter must lie in (0, 1), got {self.h}")

    def __repr__(self) -> str:
        return f"H({self.h})"

    @property
    def is_brownian(self) -> bool:
        return bool(self.h == 0.5)

    @property
    def alpha(self) -> float:
        """Order of the kernel singularity at the origin, |H - 1/2|."""
        return abs(self.h - 0.5)


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (self.t_end > 0.0) or not math.isfinite(self.t_end):
            raise ValueError(f"Grid horizon must be positive, got {self.t_end}")
        if self.n_steps < 1:
            raise ValueError(f"Grid needs at least one step, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @cached_property
    def points(self) -> npt.NDArray[np.float64]:
        # t_i = i * T / N, computed in that order so that t_N == T exactly
        n = self.n_steps
        points = np.arange(n + 1, dtype=np.float64) * self.t_end / n
        points.setflags(write=False)
        return points

    def check_index(self, index: int) -> None:
        if not (0 <= index <= self.n_steps):
            raise IndexError(f"Grid index {index} outside 0..{self.n_steps}")
