"""Containers for first- and second-order sensitivity fields."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid1D, GridDensity


def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class FirstOrderField:
    """``xi_t(x_s; y_j)`` stored as ``values[time, source, j]``.

    ``coords`` is ``"zeta"`` for the shifted frame or ``"mu"`` for the
    original one.
    """

    grid: Grid1D
    sources: np.ndarray
    times: np.ndarray
    values: np.ndarray
    coords: str = "zeta"

    def __post_init__(self):
        for name in ("sources", "times", "values"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        expected = (self.times.size, self.sources.size, self.grid.n_points)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")

    def slice(self, t_index: int, source_index: int) -> GridDensity:
        return GridDensity(self.grid, self.values[t_index, source_index], signed=True)

    def slice_masses(self) -> np.ndarray:
        return self.grid.h * self.values.sum(axis=-1)

    def tv_norms(self) -> np.ndarray:
        return self.grid.h * np.abs(self.values).sum(axis=-1)

    def time_index(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[idx], t, rtol=0, atol=1e-12 * max(1.0, abs(t))):
            raise IndexError(f"time {t} not retained in the field")
        return idx


@dataclass(frozen=True, eq=False)
class SecondOrderField:
    """``eta_t(x, z; y_j)`` stored as ``values[time, pair, j]``."""

    grid: Grid1D
    pairs: np.ndarray
    times: np.ndarray
    values: np.ndarray
    coords: str = "zeta"

    def __post_init__(self):
        for name in ("pairs", "times", "values"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.pairs.ndim != 2 or self.pairs.shape[1] != 2:
            raise ValueError("pairs must have shape (P, 2)")
        expected = (self.times.size, self.pairs.shape[0], self.grid.n_points)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")

    def slice(self, t_index: int, pair_index: int) -> GridDensity:
        return GridDensity(self.grid, self.values[t_index, pair_index], signed=True)

    def slice_masses(self) -> np.ndarray:
        return self.grid.h * self.values.sum(axis=-1)

    def tv_norms(self) -> np.ndarray:
        return self.grid.h * np.abs(self.values).sum(axis=-1)

    def time_index(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[idx], t, rtol=0, atol=1e-12 * max(1.0, abs(t))):
            raise IndexError(f"time {t} not retained in the field")
        return idx
