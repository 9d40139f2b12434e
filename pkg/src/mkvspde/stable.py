"""Symmetric alpha-stable laws, Brownian paths and named random streams.

Normalization: a unit-time stable increment has characteristic function
``exp(-|u|**alpha)``, which matches the generator ``-|Delta|^{alpha/2}``
acting with unit scale coefficient.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .grid import DomainError, Grid1D, GridDensity


@dataclass(frozen=True)
class StableParams:
    alpha: float

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise DomainError(f"alpha must lie in the open interval (1, 2), got {self.alpha}")


# -- random streams ----------------------------------------------------------
#
# Splitting rule: the stream for (master_seed, role, index) is the numpy
# SeedSequence with entropy=master_seed and spawn_key=(crc32(role), index).
# Streams for different roles never overlap and adding a consumer never
# shifts another consumer's draws.

def stream_sequence(master_seed: int, role: str, index: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=(zlib.crc32(role.encode()), int(index)))


def rng_stream(master_seed: int, role: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_sequence(master_seed, role, index)))


def stream_seed(master_seed: int, role: str, index: int = 0) -> int:
    """A 64-bit integer seed derived from the named stream."""
    lo, hi = stream_sequence(master_seed, role, index).generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


# -- Brownian paths ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NoisePath:
    """A sampled scalar Brownian path on a uniform time grid."""

    horizon: float
    increments: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        inc = np.array(self.increments, dtype=float, copy=True)
        if inc.ndim != 1 or inc.size < 1:
            raise DomainError("a noise path needs at least one increment")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)
        values = np.concatenate(([0.0], np.cumsum(inc)))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.increments.size

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)

    def value_at(self, t: float) -> float:
        """W at time ``t``, linear between path nodes."""
        return float(np.interp(t, self.times, self.values))

    def coarsen(self, factor: int) -> "NoisePath":
        """Same Brownian path observed on a grid ``factor`` times coarser."""
        if factor < 1 or self.n_steps % factor:
            raise DomainError(f"cannot coarsen {self.n_steps} steps by {factor}")
        inc = self.increments.reshape(-1, factor).sum(axis=1)
        return NoisePath(self.horizon, inc, self.seed)

    @classmethod
    def zero(cls, horizon: float, n_steps: int) -> "NoisePath":
        return cls(horizon, np.zeros(n_steps))


def sample_brownian_path(T: float, n_steps: int, seed: int) -> NoisePath:
    if not T > 0:
        raise DomainError(f"horizon must be positive, got {T}")
    if n_steps < 1:
        raise DomainError(f"n_steps must be >= 1, got {n_steps}")
    rng = np.random.default_rng(seed)
    dt = T / n_steps
    return NoisePath(T, rng.normal(0.0, np.sqrt(dt), size=n_steps), seed)


# -- stable laws -------------------------------------------------------------

def sample_stable_increment(p: StableParams, dt: float, rng: np.random.Generator, size=None):
    """Symmetric stable increment(s) with characteristic function ``exp(-dt |u|^alpha)``.

    Uses the Chambers-Mallows-Stuck polar construction (uniform angle and
    unit exponential) for the symmetric case.
    """
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    a = p.alpha
    v = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, size=size)
    e = rng.standard_exponential(size=size)
    x = np.sin(a * v) / np.cos(v) ** (1.0 / a) * (np.cos((1.0 - a) * v) / e) ** ((1.0 - a) / a)
    return dt ** (1.0 / a) * x


def stable_symbol(grid: Grid1D, t: float, a_bar: float, p: StableParams) -> np.ndarray:
    return np.exp(-t * a_bar * grid.k ** p.alpha)


def stable_kernel(grid: Grid1D, t: float, a_bar: float, p: StableParams) -> GridDensity:
    """Periodic stable transition density centered at the origin."""
    if t < 0 or not a_bar > 0:
        raise DomainError(f"need t >= 0 and a_bar > 0, got t={t}, a_bar={a_bar}")
    values = np.fft.irfft(stable_symbol(grid, t, a_bar, p), n=grid.n_points) / grid.h
    # x = 0 sits at index n/2
    return GridDensity(grid, np.roll(values, grid.n_points // 2), signed=True)


def convolve(mu: GridDensity, nu: GridDensity) -> GridDensity:
    """Periodic convolution ``(mu * nu)(x) = int mu(y) nu(x - y) dy`` on the grid."""
    grid = mu.grid
    c = grid.h * np.fft.irfft(np.fft.rfft(mu.values) * np.fft.rfft(nu.values), n=grid.n_points)
    return GridDensity(grid, np.roll(c, grid.n_points // 2), signed=mu.signed or nu.signed)


def stable_evolve(mu: GridDensity, t: float, a_bar: float, p: StableParams) -> GridDensity:
    """Apply the constant-coefficient stable semigroup to a density."""
    grid = mu.grid
    return mu.with_values(grid.fourier_multiply(mu.values, stable_symbol(grid, t, a_bar, p)))
