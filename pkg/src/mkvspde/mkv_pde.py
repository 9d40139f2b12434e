"""Deterministic nonlinear solver for the shifted-frame density ``zeta_t``.

Density form of the transformed equation::

    d zeta/dt = -d/dx(b~ zeta) - |Delta|^{alpha/2}(a~ zeta)

with ``b~(x) = b(x + sigma W_t, zeta(. - sigma W_t))`` and
``a~(x) = a(x + sigma W_t)``, the noise frozen at the left end of a step.

One step splits ``a~ = a_bar + (a~ - a_bar)``.  The constant part is
integrated exactly by its exponential factor, everything else explicitly::

    zeta_{n+1} = E [zeta_n + dt (-d/dx(b~(m) zeta_n) - |Delta|^{alpha/2}((a~ - a_bar) zeta_n))]

where the drift sees the midpoint measure ``m = (zeta_n + zeta_{n+1}) / 2``,
resolved by Picard iteration.  The sensitivity solvers linearize exactly this
map, so their fields are the derivatives of the discrete solution operator.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .characteristics import CommonNoiseSpec
from .drift import BoundDrift, DriftSpec
from .grid import POSITIVITY_TOLERANCE, DomainError, Grid1D, GridDensity, check_same_grid
from .operators import ScaleField
from .stable import NoisePath, StableParams


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    picard_tol: float = 1e-10
    picard_max_iter: int = 25
    imex: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if not self.picard_tol > 0:
            raise DomainError("picard_tol must be positive")
        if self.picard_max_iter < 1:
            raise DomainError("picard_max_iter must be >= 1")


class PicardError(RuntimeError):
    """A fixed-point loop ran out of iterations."""

    def __init__(self, message: str, residual: float, time: float | None = None):
        super().__init__(message)
        self.residual = residual
        self.time = time


def _l1(v: np.ndarray, h: float) -> float:
    return float(h * np.abs(v).sum())


class StepOperator:
    """Coefficients of one step ``[t_n, t_n + dt]`` frozen at noise value ``w``."""

    def __init__(self, grid: Grid1D, spec: DriftSpec, a: ScaleField, noise: CommonNoiseSpec,
                 p: StableParams, w: float, dt: float, imex: bool = True):
        self.grid = grid
        self.dt = dt
        self.shift = noise.offset(w)
        self.drift = BoundDrift.on_grid(spec, grid, self.shift)
        self.dependent = not spec.measure_independent
        self.a_tilde = a.at(grid.x + self.shift)
        self.a_bar = float(self.a_tilde.mean()) if imex else 0.0
        self.a_rest = self.a_tilde - self.a_bar
        self.has_rest = bool(np.any(self.a_rest))
        self.lap = grid.k ** p.alpha
        self.decay = np.exp(-dt * self.a_bar * self.lap)
        self._ik = 1j * grid.k
        self._ik[-1] = 0.0
        self._static_b = None if self.dependent else self.drift.value(np.zeros(grid.n_points))

    def to_mu(self, g: np.ndarray) -> np.ndarray:
        return self.grid.translate(g, self.shift) if self.shift else g

    def coefficient(self, m: np.ndarray | None) -> np.ndarray:
        """Dressed drift for measure argument ``m`` (shifted frame)."""
        if self._static_b is not None:
            return self._static_b
        return self.drift.value(self.to_mu(m))

    def d_coefficient(self, m: np.ndarray, dm: np.ndarray) -> np.ndarray:
        return self.drift.linear(self.to_mu(m), self.to_mu(dm))

    def dd_coefficient(self, dm1: np.ndarray, dm2: np.ndarray) -> np.ndarray:
        return self.drift.quadratic(self.to_mu(dm1), self.to_mu(dm2))

    def rhs_hat(self, b: np.ndarray, g: np.ndarray, source: np.ndarray | None = None) -> np.ndarray:
        """Fourier coefficients of ``-d/dx(b g) - |Delta|(a_rest g) - d/dx source``."""
        flux = b * g if source is None else b * g + source
        out = -self._ik * np.fft.rfft(flux, axis=-1)
        if self.has_rest:
            out -= self.lap * np.fft.rfft(self.a_rest * g, axis=-1)
        return out

    def advance(self, g: np.ndarray, rhs_hat: np.ndarray) -> np.ndarray:
        g_hat = np.fft.rfft(g, axis=-1) + self.dt * rhs_hat
        return np.fft.irfft(self.decay * g_hat, n=self.grid.n_points, axis=-1)

    def divergence_hat(self, flux: np.ndarray) -> np.ndarray:
        return -self._ik * np.fft.rfft(flux, axis=-1)


def zeta_step(op: StepOperator, g0: np.ndarray, cfg: SolverConfig, t: float | None = None):
    """One Picard-resolved step; returns ``(g1, iterations)``."""
    if not op.dependent:
        return op.advance(g0, op.rhs_hat(op.coefficient(None), g0)), 1
    h = op.grid.h
    g1 = g0
    change = np.inf
    for it in range(1, cfg.picard_max_iter + 1):
        b = op.coefficient(0.5 * (g0 + g1))
        new = op.advance(g0, op.rhs_hat(b, g0))
        change = _l1(new - g1, h) / max(_l1(new, h), np.finfo(float).tiny)
        g1 = new
        if change < cfg.picard_tol:
            return g1, it
    raise PicardError(f"within-step Picard did not converge at t={t}: change {change:.3e}", change, t)


def step_density(g: GridDensity, w: float, spec: DriftSpec, a: ScaleField, noise: CommonNoiseSpec,
                 cfg: SolverConfig, p: StableParams) -> GridDensity:
    grid = check_same_grid(g.grid, a.grid)
    op = StepOperator(grid, spec, a, noise, p, w, cfg.dt, cfg.imex)
    out, _ = zeta_step(op, g.values, cfg)
    return _as_density(grid, out, g.signed)


def _as_density(grid: Grid1D, values: np.ndarray, signed: bool = False) -> GridDensity:
    top = float(np.abs(values).max())
    return GridDensity(grid, values, signed or bool(values.min() < -POSITIVITY_TOLERANCE * top))


# -- trajectories -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityTrajectory:
    """Retained snapshots of a density evolution plus per-step diagnostics.

    ``step_*`` arrays cover every solver step (``n_steps + 1`` entries,
    iterations ``n_steps``); ``times``/``values`` only the retained ones.
    """

    grid: Grid1D
    times: np.ndarray
    values: np.ndarray
    step_times: np.ndarray
    masses: np.ndarray
    min_values: np.ndarray
    max_values: np.ndarray
    tv_norms: np.ndarray
    picard_iterations: np.ndarray
    path: NoisePath | None = None
    noise: CommonNoiseSpec | None = None
    frame: str = "zeta"
    retained_steps: np.ndarray = field(default=None)

    def __post_init__(self):
        for name in ("times", "values", "step_times", "masses", "min_values", "max_values",
                     "tv_norms", "picard_iterations", "retained_steps"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.array(arr, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("time stamps must be strictly increasing")

    def __len__(self) -> int:
        return self.times.size

    def density(self, i: int) -> GridDensity:
        return _as_density(self.grid, self.values[i])

    @property
    def final(self) -> GridDensity:
        return self.density(-1)

    @property
    def has_all_steps(self) -> bool:
        return self.times.size == self.step_times.size

    def mass_drift(self) -> float:
        """Largest relative deviation of the mass from its initial value."""
        m0 = self.masses[0]
        return float(np.abs(self.masses - m0).max() / abs(m0)) if m0 else float(np.abs(self.masses).max())

    def max_undershoot(self) -> float:
        """Largest ``-min / max`` ratio over all steps (0 when nonnegative)."""
        return float(max(0.0, np.max(-self.min_values / self.max_values)))

    def diagnostics(self) -> dict:
        return {
            "frame": self.frame,
            "step_times": self.step_times.tolist(),
            "mass": self.masses.tolist(),
            "min_density": self.min_values.tolist(),
            "tv_norm": self.tv_norms.tolist(),
            "picard_iterations": self.picard_iterations.tolist(),
            "mass_drift": self.mass_drift(),
            "max_undershoot": self.max_undershoot(),
        }

    def export(self, directory, prefix: str = "density") -> list[Path]:
        """Write one CSV per retained time plus a JSON diagnostics file."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for i, t in enumerate(self.times):
            path = directory / f"{prefix}_{i:03d}.csv"
            GridDensity(self.grid, self.values[i], signed=True).to_csv(path)
            written.append(path)
        diag = directory / f"{prefix}_diagnostics.json"
        payload = {"times": self.times.tolist(), **self.diagnostics()}
        diag.write_text(json.dumps(payload, indent=1, sort_keys=True))
        written.append(diag)
        return written

    def mapped(self, values: np.ndarray, frame: str) -> "DensityTrajectory":
        """Same diagnostics, different retained values (e.g. after a frame change)."""
        return DensityTrajectory(self.grid, self.times, values, self.step_times, self.masses,
                                 self.min_values, self.max_values, self.tv_norms,
                                 self.picard_iterations, self.path, self.noise, frame,
                                 self.retained_steps)


def retained_indices(n_steps: int, snapshots) -> np.ndarray:
    """Indices of retained steps: ``snapshots`` uniform stamps (final included) or ``"all"``."""
    if snapshots == "all":
        return np.arange(n_steps + 1)
    count = int(snapshots)
    if count < 2:
        raise DomainError("need at least two retained snapshots")
    return np.unique(np.rint(np.linspace(0, n_steps, count)).astype(int))


def step_count(horizon: float, dt: float) -> int:
    n = int(round(horizon / dt))
    if n < 1 or abs(n * dt - horizon) > 1e-9 * horizon:
        raise DomainError(f"dt={dt} does not divide the horizon {horizon}")
    return n


def _check_path(path: NoisePath, n_steps: int):
    if n_steps % path.n_steps and path.n_steps % n_steps:
        raise DomainError(
            f"solver steps ({n_steps}) and noise steps ({path.n_steps}) must nest dyadically"
        )


def solve_zeta(Y: GridDensity, path: NoisePath, spec: DriftSpec, a: ScaleField, noise: CommonNoiseSpec,
               cfg: SolverConfig, p: StableParams, snapshots=11) -> DensityTrajectory:
    grid = check_same_grid(Y.grid, a.grid)
    n_steps = step_count(path.horizon, cfg.dt)
    _check_path(path, n_steps)
    step_times = np.linspace(0.0, path.horizon, n_steps + 1)
    keep = retained_indices(n_steps, snapshots)
    keep_set = {int(i): j for j, i in enumerate(keep)}

    out = np.empty((keep.size, grid.n_points))
    masses = np.empty(n_steps + 1)
    mins = np.empty(n_steps + 1)
    maxs = np.empty(n_steps + 1)
    tvs = np.empty(n_steps + 1)
    iters = np.zeros(n_steps, dtype=int)

    def record(i, g):
        masses[i] = grid.h * g.sum()
        mins[i], maxs[i] = g.min(), g.max()
        tvs[i] = grid.h * np.abs(g).sum()
        if i in keep_set:
            out[keep_set[i]] = g

    g = np.array(Y.values, dtype=float)
    record(0, g)
    for n in range(n_steps):
        t = step_times[n]
        op = StepOperator(grid, spec, a, noise, p, path.value_at(t), cfg.dt, cfg.imex)
        g, iters[n] = zeta_step(op, g, cfg, t)
        record(n + 1, g)
    return DensityTrajectory(grid, step_times[keep], out, step_times, masses, mins, maxs, tvs, iters,
                             path, noise, "zeta", keep)


def step_operator(traj: DensityTrajectory, n: int, spec: DriftSpec, a: ScaleField,
                  cfg: SolverConfig, p: StableParams) -> StepOperator:
    """Rebuild the frozen coefficients the base solve used on step ``n``."""
    t = traj.step_times[n]
    return StepOperator(traj.grid, spec, a, traj.noise, p, traj.path.value_at(t), cfg.dt, cfg.imex)


def mild_picard_solve(Y: GridDensity, path: NoisePath, spec: DriftSpec, a_bar: float, noise: CommonNoiseSpec,
                      cfg: SolverConfig, p: StableParams, snapshots=11) -> DensityTrajectory:
    """Global fixed point of the Duhamel form for a constant scale coefficient.

    ``g_t = G_t * Y - int_0^t d/dx G_{t-s} * (b~_s g_s) ds`` with the
    trapezoidal rule in ``s``; the convolution sum is accumulated by the
    recursion ``R_i = E_dt R_{i-1} + N_i`` which is exact for the semigroup.
    """
    grid = Y.grid
    if not a_bar > 0:
        raise DomainError("a_bar must be positive")
    a = ScaleField(grid, "constant", {"value": a_bar}, bound=max(2.0, 2.0 * a_bar, 2.0 / a_bar))
    n_steps = step_count(path.horizon, cfg.dt)
    _check_path(path, n_steps)
    times = np.linspace(0.0, path.horizon, n_steps + 1)
    lap = grid.k ** p.alpha
    e_dt = np.exp(-cfg.dt * a_bar * lap)
    e_i = np.exp(-np.outer(times, a_bar * lap))
    free = np.fft.rfft(Y.values)[None, :] * e_i
    ops = [StepOperator(grid, spec, a, noise, p, path.value_at(t), cfg.dt, True) for t in times] \
        if spec.measure_independent else None

    g = np.fft.irfft(free, n=grid.n_points, axis=-1)
    iterations = 0
    change = np.inf
    for iterations in range(1, cfg.picard_max_iter + 1):
        n_hat = np.empty_like(free)
        for i, t in enumerate(times):
            op = ops[i] if ops is not None else StepOperator(grid, spec, a, noise, p, path.value_at(t), cfg.dt, True)
            n_hat[i] = op.divergence_hat(op.coefficient(g[i]) * g[i])
        duhamel = np.zeros_like(free)
        acc = n_hat[0].copy()
        for i in range(1, n_steps + 1):
            acc = e_dt * acc + n_hat[i]
            duhamel[i] = acc
        # trapezoid: halve the two end contributions
        duhamel = cfg.dt * (duhamel - 0.5 * e_i * n_hat[0][None, :] - 0.5 * n_hat)
        duhamel[0] = 0.0
        new = np.fft.irfft(free + duhamel, n=grid.n_points, axis=-1)
        diff = grid.h * np.abs(new - g).sum(axis=-1)
        norm = np.maximum(grid.h * np.abs(new).sum(axis=-1), np.finfo(float).tiny)
        change = float(np.max(diff / norm))
        g = new
        if change < cfg.picard_tol:
            break
    else:
        raise PicardError(f"mild Picard iteration did not converge: change {change:.3e}", change)

    keep = retained_indices(n_steps, snapshots)
    masses = grid.h * g.sum(axis=-1)
    return DensityTrajectory(grid, times[keep], g[keep], times, masses, g.min(axis=-1), g.max(axis=-1),
                             grid.h * np.abs(g).sum(axis=-1), np.full(n_steps, iterations), path, noise,
                             "zeta", keep)


def stability_probe(Y1: GridDensity, Y2: GridDensity, path: NoisePath, spec: DriftSpec, a: ScaleField,
                    noise: CommonNoiseSpec, cfg: SolverConfig, p: StableParams) -> float:
    """``max_t |zeta^1_t - zeta^2_t|_1 / |Y^1 - Y^2|_1`` over all solver steps."""
    check_same_grid(Y1.grid, Y2.grid)
    d0 = Y1.grid.h * np.abs(Y1.values - Y2.values).sum()
    if d0 == 0.0:
        raise DomainError("initial data coincide; the stability ratio is undefined")
    t1 = solve_zeta(Y1, path, spec, a, noise, cfg, p, snapshots="all")
    t2 = solve_zeta(Y2, path, spec, a, noise, cfg, p, snapshots="all")
    d = Y1.grid.h * np.abs(t1.values - t2.values).sum(axis=-1)
    return float(d.max() / d0)
