"""Periodic 1-D grids, densities and test functions living on them.

The whole line is truncated to the box ``[-L, L)`` with periodic wrap.  Every
density is stored by its cell values (units 1/length), so the mass of a
density is ``h * sum(values)``.  Spectral helpers (derivatives, Fourier
multipliers, translations) are collected here because every other module
builds on them.
"""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

POSITIVITY_TOLERANCE = 1e-8

_BINARY_MAGIC = b"MKVD"
_BINARY_HEADER = struct.Struct("<4sdqd?")


class GridMismatchError(ValueError):
    """Raised when two grid objects that must share a grid do not."""


class DomainError(ValueError):
    """Raised for arguments outside the admissible domain."""


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on ``[-half_width, half_width)``.

    Parameters
    ----------
    half_width : float
        Half the box length ``L``.
    n_points : int
        Number of cells; a power of two, at least 8.
    """

    half_width: float
    n_points: int

    def __post_init__(self):
        if not self.half_width > 0 or not np.isfinite(self.half_width):
            raise DomainError(f"half_width must be positive, got {self.half_width}")
        n = int(self.n_points)
        if n != self.n_points or n < 8 or n & (n - 1):
            raise DomainError(f"n_points must be a power of two >= 8, got {self.n_points}")

    @property
    def length(self) -> float:
        return 2.0 * self.half_width

    @property
    def h(self) -> float:
        return self.length / self.n_points

    @cached_property
    def x(self) -> np.ndarray:
        x = -self.half_width + self.h * np.arange(self.n_points)
        x.setflags(write=False)
        return x

    @cached_property
    def k(self) -> np.ndarray:
        """Non-negative angular frequencies of the real FFT (length n//2 + 1)."""
        k = 2.0 * np.pi * np.fft.rfftfreq(self.n_points, d=self.h)
        k.setflags(write=False)
        return k

    @cached_property
    def k_full(self) -> np.ndarray:
        """Symmetric angular frequency set of the full FFT."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.h)
        k.setflags(write=False)
        return k

    @cached_property
    def _ik(self) -> np.ndarray:
        ik = 1j * self.k
        ik[-1] = 0.0  # Nyquist mode carries no real derivative
        ik.setflags(write=False)
        return ik

    def wrap(self, x):
        """Map positions into ``[-L, L)``."""
        x = np.asarray(x, dtype=float)
        out = x - self.length * np.floor((x + self.half_width) / self.length)
        # rounding can land exactly on the right end
        return np.where(out >= self.half_width, out - self.length, out)[()]

    def wrap_difference(self, d):
        """Wrap differences of two points of ``[-L, L)``; cheaper than :meth:`wrap`."""
        d = np.array(d, dtype=float)
        d[d >= self.half_width] -= self.length
        d[d < -self.half_width] += self.length
        return d[()]

    def contains(self, x0: float) -> bool:
        return -self.half_width <= x0 < self.half_width

    # spectral helpers ------------------------------------------------------

    def fourier_multiply(self, values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        """Apply the real-FFT multiplier ``symbol`` along the last axis."""
        return np.fft.irfft(np.fft.rfft(values, axis=-1) * symbol, n=self.n_points, axis=-1)

    def derivative(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        if order == 1:
            return self.fourier_multiply(values, self._ik)
        return self.fourier_multiply(values, (1j * self.k) ** order)

    def translate(self, values: np.ndarray, s: float) -> np.ndarray:
        """Return samples of ``v(x - s)`` using the trigonometric interpolant."""
        if s == 0.0:
            return np.array(values, dtype=float, copy=True)
        return self.fourier_multiply(values, np.exp(-1j * self.k * s))

    def same_as(self, other: "Grid1D") -> bool:
        return self.half_width == other.half_width and self.n_points == other.n_points


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


def check_same_grid(*grids: Grid1D) -> Grid1D:
    first = grids[0]
    for g in grids[1:]:
        if not first.same_as(g):
            raise GridMismatchError(f"grid mismatch: {first} vs {g}")
    return first


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Cell values of a (possibly signed) density on a :class:`Grid1D`."""

    grid: Grid1D
    values: np.ndarray
    signed: bool = False

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.n_points,):
            raise GridMismatchError(
                f"expected {self.grid.n_points} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("density values must be finite")
        if not self.signed and vals.size:
            top = max(float(np.max(np.abs(vals))), np.finfo(float).tiny)
            if vals.min() < -POSITIVITY_TOLERANCE * top:
                raise ValueError(
                    f"unsigned density undershoots: min {vals.min():.3e} vs max {top:.3e}"
                )
        object.__setattr__(self, "values", vals)

    @property
    def mass(self) -> float:
        return total_mass(self)

    def with_values(self, values, signed: bool | None = None) -> "GridDensity":
        return GridDensity(self.grid, values, self.signed if signed is None else signed)

    def __add__(self, other: "GridDensity") -> "GridDensity":
        check_same_grid(self.grid, other.grid)
        return GridDensity(self.grid, self.values + other.values, self.signed or other.signed)

    def __sub__(self, other: "GridDensity") -> "GridDensity":
        check_same_grid(self.grid, other.grid)
        return GridDensity(self.grid, self.values - other.values, True)

    def __mul__(self, c: float) -> "GridDensity":
        return GridDensity(self.grid, c * self.values, self.signed or c < 0)

    __rmul__ = __mul__

    # serialization ---------------------------------------------------------

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "value"])
        for xj, vj in zip(self.grid.x, self.values):
            writer.writerow([repr(float(xj)), repr(float(vj))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_bytes(self) -> bytes:
        g = self.grid
        header = _BINARY_HEADER.pack(_BINARY_MAGIC, g.half_width, g.n_points, g.h, self.signed)
        return header + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GridDensity":
        magic, half_width, n, h, signed = _BINARY_HEADER.unpack_from(blob)
        if magic != _BINARY_MAGIC:
            raise ValueError("not a density artifact")
        grid = Grid1D(half_width, n)
        if not np.isclose(h, grid.h, rtol=1e-15, atol=0):
            raise ValueError("inconsistent grid spacing in header")
        values = np.frombuffer(blob, dtype="<f8", offset=_BINARY_HEADER.size, count=n)
        return cls(grid, values, signed)

    @classmethod
    def from_csv(cls, path, half_width: float, signed: bool = False) -> "GridDensity":
        rows = list(csv.reader(Path(path).read_text().splitlines()))[1:]
        values = np.array([float(r[1]) for r in rows])
        return cls(Grid1D(half_width, len(values)), values, signed)


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Samples of a test function on the grid."""

    __test__ = False  # keep pytest from collecting this class

    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.n_points,):
            raise GridMismatchError(
                f"expected {self.grid.n_points} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("test function values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: Grid1D, fn) -> "TestFunction":
        return cls(grid, np.broadcast_to(fn(grid.x), grid.x.shape))

    def __add__(self, other: "TestFunction") -> "TestFunction":
        check_same_grid(self.grid, other.grid)
        return TestFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        check_same_grid(self.grid, other.grid)
        return TestFunction(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "TestFunction":
        return TestFunction(self.grid, c * self.values)

    __rmul__ = __mul__


def pairing(f: TestFunction, mu: GridDensity) -> float:
    """Rectangle-rule pairing ``(f, mu) = h * sum f_j mu_j``."""
    grid = check_same_grid(f.grid, mu.grid)
    return float(grid.h * np.dot(f.values, mu.values))


def total_mass(mu: GridDensity) -> float:
    return float(mu.grid.h * np.sum(mu.values))


def tv_norm(mu: GridDensity) -> float:
    """Total variation of the grid measure, ``h * sum |mu_j|``."""
    return float(mu.grid.h * np.sum(np.abs(mu.values)))


def l1_distance(mu1: GridDensity, mu2: GridDensity) -> float:
    grid = check_same_grid(mu1.grid, mu2.grid)
    return float(grid.h * np.sum(np.abs(mu1.values - mu2.values)))


def dirac_weights(grid: Grid1D, x0: float) -> tuple[int, int, float]:
    """Return the bracketing cells ``(j, j+1)`` and the weight of the right one."""
    if not grid.contains(x0):
        raise DomainError(f"x0={x0} outside [{-grid.half_width}, {grid.half_width})")
    r = (x0 + grid.half_width) / grid.h
    nearest = round(r)
    if abs(r - nearest) < 1e-9:
        r = float(nearest)
    j = int(np.floor(r))
    return j % grid.n_points, (j + 1) % grid.n_points, r - j


def dirac_approx(grid: Grid1D, x0: float) -> GridDensity:
    """Unit-mass grid surrogate of the point mass at ``x0`` (linear hat split)."""
    j, j1, frac = dirac_weights(grid, x0)
    values = np.zeros(grid.n_points)
    values[j] += (1.0 - frac) / grid.h
    values[j1] += frac / grid.h
    return GridDensity(grid, values)


def gaussian_density(grid: Grid1D, center: float = 0.0, std: float = 1.0, mass: float = 1.0) -> GridDensity:
    """Sampled Gaussian, renormalized so the grid mass equals ``mass`` exactly."""
    d = grid.wrap(grid.x - center)
    values = np.exp(-0.5 * (d / std) ** 2)
    values *= mass / (grid.h * values.sum())
    return GridDensity(grid, values)
