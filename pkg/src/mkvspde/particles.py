"""Interacting particle system with common noise and stable-like jumps.

Each particle follows the Euler scheme::

    X <- X + b(X, mu^N) dt + sigma dW + a(X)**(1/alpha) dL

with ``dW`` shared by all particles and ``dL`` a per-particle symmetric
stable increment.  The drift sees a Gaussian kernel density estimate of the
empirical measure, evaluated with the same kernel quadrature as the grid
solver.  Positions live on the periodic domain ``[-L, L)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .characteristics import CommonNoiseSpec
from .drift import BoundDrift, DriftSpec
from .grid import DomainError, Grid1D, GridDensity, check_same_grid
from .mkv_pde import retained_indices, step_count
from .operators import ScaleField
from .stable import NoisePath, StableParams, rng_stream, sample_stable_increment

IDIOSYNCRATIC_ROLE = "idiosyncratic"


@dataclass(frozen=True, eq=False)
class ParticleState:
    positions: np.ndarray
    t: float

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float, copy=True)
        if pos.ndim != 1 or not np.all(np.isfinite(pos)):
            raise ValueError("positions must be a finite 1-D array")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.size

    def to_csv(self, path) -> None:
        lines = ["index,position"] + [f"{i},{x!r}" for i, x in enumerate(self.positions.tolist())]
        Path(path).write_text("\n".join(lines) + "\n")


def default_bandwidth(positions: np.ndarray, h: float) -> float:
    """Reference KDE rate ``1.06 s N^(-1/5)``, floored at the grid spacing."""
    n = positions.size
    s = float(np.std(positions)) if n > 1 else 0.0
    return max(1.06 * s * n ** -0.2, h)


def sample_initial(Y: GridDensity, rng: np.random.Generator) -> float:
    """One draw from the piecewise-constant law of ``Y`` (cells centered on the nodes)."""
    grid = Y.grid
    weights = np.clip(Y.values, 0.0, None)
    cdf = np.cumsum(weights)
    j = int(np.searchsorted(cdf, rng.uniform() * cdf[-1], side="right"))
    j = min(j, grid.n_points - 1)
    return float(grid.wrap(grid.x[j] + (rng.uniform() - 0.5) * grid.h))


def _kde_matrix(points: np.ndarray, grid: Grid1D, bandwidth: float) -> np.ndarray:
    d = grid.wrap_difference(np.subtract.outer(grid.x, points))
    return np.exp(-0.5 * (d / bandwidth) ** 2)


def empirical_density(state: ParticleState, grid: Grid1D, bandwidth: float) -> GridDensity:
    """Periodic Gaussian KDE on the grid, renormalized to unit grid mass."""
    if not bandwidth > 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth}")
    values = _kde_matrix(state.positions, grid, bandwidth).sum(axis=1)
    values /= grid.h * values.sum()
    return GridDensity(grid, values)


def simulate_particles(N: int, Y: GridDensity, path: NoisePath, spec: DriftSpec, a: ScaleField,
                       noise: CommonNoiseSpec, p: StableParams, seed_idio: int, dt: float | None = None,
                       bandwidth: float | None = None, snapshots=11,
                       stream_indices: Sequence[int] | None = None) -> list[ParticleState]:
    """Euler trajectories of ``N`` particles; returns the retained states.

    Particle ``i`` draws its initial position and all its jumps from the
    stream ``(seed_idio, "idiosyncratic", stream_indices[i])``, so the
    ensemble is reproducible and permuting ``stream_indices`` permutes the
    trajectories.  The measure argument is ``mass(Y)`` times the KDE.
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    grid = check_same_grid(Y.grid, a.grid)
    dt = path.dt if dt is None else dt
    n_steps = step_count(path.horizon, dt)
    indices = np.arange(N) if stream_indices is None else np.asarray(stream_indices, dtype=int)
    if indices.shape != (N,):
        raise ValueError("stream_indices must have length N")

    x = np.empty(N)
    jumps = np.empty((N, n_steps))
    for i, idx in enumerate(indices):
        rng = rng_stream(seed_idio, IDIOSYNCRATIC_ROLE, int(idx))
        x[i] = sample_initial(Y, rng)
        jumps[i] = sample_stable_increment(p, dt, rng, size=n_steps)

    mass = Y.mass
    times = np.linspace(0.0, path.horizon, n_steps + 1)
    keep = set(retained_indices(n_steps, snapshots).tolist())
    w = np.array([path.value_at(t) for t in times])
    states = [ParticleState(x, 0.0)] if 0 in keep else []
    inv_alpha = 1.0 / p.alpha
    for n in range(n_steps):
        drift = BoundDrift(spec, x, grid)
        if spec.measure_independent:
            b = drift.value(np.zeros(grid.n_points))
        else:
            bw = default_bandwidth(x, grid.h) if bandwidth is None else bandwidth
            b = drift.value(mass * empirical_density(ParticleState(x, times[n]), grid, bw).values)
        x = x + b * dt + noise.offset(w[n + 1] - w[n]) + a.at(x) ** inv_alpha * jumps[:, n]
        x = grid.wrap(x)
        if n + 1 in keep:
            states.append(ParticleState(x, times[n + 1]))
    return states


# -- distances -------------------------------------------------------------------


def _abs_linear_integral(y0: np.ndarray, y1: np.ndarray, dx: np.ndarray) -> np.ndarray:
    """Exact ``int |y|`` over intervals where ``y`` is linear from ``y0`` to ``y1``."""
    same = y0 * y1 >= 0
    total = np.abs(y0) + np.abs(y1)
    safe = np.where(total > 0, total, 1.0)
    return np.where(same, 0.5 * dx * total, 0.5 * dx * (y0 ** 2 + y1 ** 2) / safe)


def wasserstein1_samples(u: np.ndarray, v: np.ndarray) -> float:
    """W1 between two empirical measures on the line, ``int |F_u - F_v|``."""
    u = np.sort(np.asarray(u, dtype=float))
    v = np.sort(np.asarray(v, dtype=float))
    pts = np.concatenate((u, v))
    pts.sort()
    fu = np.searchsorted(u, pts[:-1], side="right") / u.size
    fv = np.searchsorted(v, pts[:-1], side="right") / v.size
    return float(np.sum(np.abs(fu - fv) * np.diff(pts)))


def wasserstein1_to_grid(samples: np.ndarray, density: GridDensity) -> float:
    """W1 between an empirical measure and the piecewise-constant law of a density.

    Both live on the unrolled cell domain ``[-L - h/2, L - h/2)``; the grid
    law is normalized to unit mass and its CDF is piecewise linear.
    """
    grid = density.grid
    h = grid.h
    lo = -grid.half_width - 0.5 * h
    xs = np.sort(grid.wrap(np.asarray(samples, dtype=float) + 0.5 * h) - 0.5 * h)
    cell = np.clip(density.values, 0.0, None) * h
    cell /= cell.sum()
    edges = lo + h * np.arange(grid.n_points + 1)
    cdf_edges = np.concatenate(([0.0], np.cumsum(cell)))

    def grid_cdf(t):
        j = np.clip(np.floor((t - lo) / h).astype(int), 0, grid.n_points - 1)
        return cdf_edges[j] + cell[j] * (t - edges[j]) / h

    pts = np.union1d(edges, xs)
    left, right = pts[:-1], pts[1:]
    f_emp = np.searchsorted(xs, left, side="right") / xs.size
    y0 = f_emp - grid_cdf(left)
    y1 = f_emp - grid_cdf(right)
    return float(np.sum(_abs_linear_integral(y0, y1, right - left)))


def chaos_distance(state, reference) -> float:
    """W1 between particles and a grid density or another sample set."""
    samples = state.positions if isinstance(state, ParticleState) else np.asarray(state, dtype=float)
    if isinstance(reference, GridDensity):
        return wasserstein1_to_grid(samples, reference)
    other = reference.positions if isinstance(reference, ParticleState) else np.asarray(reference, dtype=float)
    return wasserstein1_samples(samples, other)


def export_states(states: Sequence[ParticleState], directory, prefix: str = "particles") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for i, s in enumerate(states):
        path = directory / f"{prefix}_{i:03d}.csv"
        s.to_csv(path)
        written.append(path)
    return written


def export_chaos_series(times, distances, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps({"times": list(map(float, times)), "w1": list(map(float, distances))},
                               indent=1, sort_keys=True))
    return path
