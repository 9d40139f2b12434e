"""First- and second-order sensitivity of the solution map ``Y -> mu_t``.

Fields are computed in the shifted frame (``zeta`` coordinates) by the exact
linearization of the discrete step used in :mod:`mkvspde.mkv_pde`.  With
midpoint measure ``m = (zeta_n + zeta_{n+1})/2`` the first-order step is::

    xi_{n+1} = E [xi_n + dt (-d/dx(b~(m) xi_n) - |Delta|((a~ - a_bar) xi_n)
                             -d/dx(zeta_n * Db~[(xi_n + xi_{n+1})/2]))]

and the second-order step adds the flux::

    xi^x_n Db~[xi^z_m] + xi^z_n Db~[xi^x_m] + zeta_n D2b~[xi^x_m, xi^z_m]

where ``Db~``, ``D2b~`` are the directional derivatives of the dressed drift.
Both are resolved by Picard iteration like the base step.  Moving a field to
the original frame only translates its target variable
(:func:`mkvspde.characteristics.field_to_mu`).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .characteristics import CommonNoiseSpec, field_to_mu
from .drift import BoundDrift, DriftSpec
from .fields import FirstOrderField, SecondOrderField
from .grid import GridDensity, TestFunction, check_same_grid, dirac_approx
from .mkv_pde import (DensityTrajectory, PicardError, SolverConfig, retained_indices, step_operator)
from .operators import ScaleField
from .spde import solve_spde
from .stable import NoisePath, StableParams


def _require_all_steps(traj: DensityTrajectory):
    if not traj.has_all_steps:
        raise ValueError("sensitivity solves need a trajectory retained at every step (snapshots='all')")


def _linear_picard(op, xi0, base_hat, g0, mu_m, cfg: SolverConfig, t):
    """Resolve ``xi1 = E[xi0 + dt(base + coupling((xi0 + xi1)/2))]`` by fixed-point iteration."""
    h = op.grid.h
    xi1 = xi0
    change = np.inf
    for _ in range(cfg.picard_max_iter):
        db = op.drift.linear(mu_m, op.to_mu(0.5 * (xi0 + xi1)))
        new = op.advance(xi0, base_hat + op.divergence_hat(g0 * db))
        diff = h * np.abs(new - xi1).sum(axis=-1)
        scale = np.maximum(h * np.abs(new).sum(axis=-1), np.finfo(float).tiny)
        change = float(np.max(diff / scale))
        xi1 = new
        if change < cfg.picard_tol:
            return xi1
    raise PicardError(f"linearized Picard did not converge at t={t}: change {change:.3e}", change, t)


def solve_xi(x_sources: Sequence[float], zeta_traj: DensityTrajectory, path: NoisePath, spec: DriftSpec,
             a: ScaleField, noise: CommonNoiseSpec, cfg: SolverConfig, p: StableParams,
             snapshots=11) -> FirstOrderField:
    """``xi_t(x; .) = delta zeta_t / delta Y(x)`` for each source ``x``."""
    _require_all_steps(zeta_traj)
    grid = check_same_grid(zeta_traj.grid, a.grid)
    sources = np.asarray(x_sources, dtype=float)
    zeta = zeta_traj.values
    n_steps = zeta.shape[0] - 1
    keep = retained_indices(n_steps, snapshots)
    keep_set = {int(i): j for j, i in enumerate(keep)}
    out = np.empty((keep.size, sources.size, grid.n_points))

    xi = np.stack([dirac_approx(grid, x).values for x in sources])
    if 0 in keep_set:
        out[keep_set[0]] = xi
    for n in range(n_steps):
        op = step_operator(zeta_traj, n, spec, a, cfg, p)
        g0, g1 = zeta[n], zeta[n + 1]
        m = 0.5 * (g0 + g1)
        base_hat = op.rhs_hat(op.coefficient(m), xi)
        if op.dependent:
            xi = _linear_picard(op, xi, base_hat, g0, op.to_mu(m), cfg, zeta_traj.step_times[n])
        else:
            xi = op.advance(xi, base_hat)
        if n + 1 in keep_set:
            out[keep_set[n + 1]] = xi
    return FirstOrderField(grid, sources, zeta_traj.step_times[keep], out, coords="zeta")


def _source_indices(field: FirstOrderField, xs) -> np.ndarray:
    idx = []
    for x in xs:
        hits = np.flatnonzero(np.isclose(field.sources, x, rtol=0, atol=1e-12))
        if not hits.size:
            raise KeyError(f"no first-order slice for source {x}")
        idx.append(int(hits[0]))
    return np.array(idx)


def solve_eta(pairs, xi_field: FirstOrderField, zeta_traj: DensityTrajectory, path: NoisePath,
              spec: DriftSpec, a: ScaleField, noise: CommonNoiseSpec, cfg: SolverConfig, p: StableParams,
              snapshots=11) -> SecondOrderField:
    """``eta_t(x, z; .)`` for each requested pair, zero initial data."""
    _require_all_steps(zeta_traj)
    grid = check_same_grid(zeta_traj.grid, xi_field.grid, a.grid)
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    zeta = zeta_traj.values
    n_steps = zeta.shape[0] - 1
    if xi_field.times.size != n_steps + 1:
        raise ValueError("second-order solves need xi retained at every step (snapshots='all')")
    ix = _source_indices(xi_field, pairs[:, 0])
    iz = _source_indices(xi_field, pairs[:, 1])
    keep = retained_indices(n_steps, snapshots)
    keep_set = {int(i): j for j, i in enumerate(keep)}
    out = np.empty((keep.size, pairs.shape[0], grid.n_points))

    eta = np.zeros((pairs.shape[0], grid.n_points))
    if 0 in keep_set:
        out[keep_set[0]] = eta
    xi = xi_field.values
    for n in range(n_steps):
        op = step_operator(zeta_traj, n, spec, a, cfg, p)
        g0, g1 = zeta[n], zeta[n + 1]
        m = 0.5 * (g0 + g1)
        b = op.coefficient(m)
        if op.dependent:
            mu_m = op.to_mu(m)
            xx0, zz0 = xi[n, ix], xi[n, iz]
            xxm = 0.5 * (xi[n, ix] + xi[n + 1, ix])
            zzm = 0.5 * (xi[n, iz] + xi[n + 1, iz])
            flux = _q_flux(op.drift, op.to_mu, mu_m, g0, xx0, zz0, xxm, zzm)
            base_hat = op.rhs_hat(b, eta, source=flux)
            eta = _linear_picard(op, eta, base_hat, g0, mu_m, cfg, zeta_traj.step_times[n])
        else:
            eta = op.advance(eta, op.rhs_hat(b, eta))
        if n + 1 in keep_set:
            out[keep_set[n + 1]] = eta
    return SecondOrderField(grid, pairs, zeta_traj.step_times[keep], out, coords="zeta")


def _q_flux(drift: BoundDrift, to_mu, mu, g, xi_x, xi_z, xi_x_w, xi_z_w):
    """Flux whose negative divergence is the second-order source.

    ``xi_x, xi_z`` multiply the drift derivative as densities in ``y``;
    ``xi_x_w, xi_z_w`` are the arguments the drift is differentiated along.
    """
    dx, dz = to_mu(xi_x_w), to_mu(xi_z_w)
    return xi_x * drift.linear(mu, dz) + xi_z * drift.linear(mu, dx) + g * drift.quadratic(dx, dz)


def assemble_q(xi_field: FirstOrderField, zeta_traj: DensityTrajectory, spec: DriftSpec, t_index: int,
               pair) -> GridDensity:
    """Density form of the second-order source at a retained time of ``zeta_traj``.

    All factors are taken at the same time; the stepper in :func:`solve_eta`
    uses the midpoint-consistent variant of the same expression.
    """
    grid = check_same_grid(xi_field.grid, zeta_traj.grid)
    t = zeta_traj.times[t_index]
    i = xi_field.time_index(t)
    ix, iz = _source_indices(xi_field, pair)
    w = zeta_traj.path.value_at(t) if zeta_traj.path is not None else 0.0
    s = zeta_traj.noise.offset(w) if zeta_traj.noise is not None else 0.0
    drift = BoundDrift.on_grid(spec, grid, s)

    def to_mu(v):
        return grid.translate(v, s) if s else v

    g = zeta_traj.values[t_index]
    xi_x, xi_z = xi_field.values[i, ix], xi_field.values[i, iz]
    flux = _q_flux(drift, to_mu, to_mu(g), g, xi_x, xi_z, xi_x, xi_z)
    return GridDensity(grid, -grid.derivative(flux), signed=True)


def solve_dual_backward(f_T: TestFunction, zeta_traj: DensityTrajectory, path: NoisePath, spec: DriftSpec,
                        a: ScaleField, noise: CommonNoiseSpec, cfg: SolverConfig, p: StableParams,
                        t_from: int) -> TestFunction:
    """Integrate ``df/dt = -(b~ . grad) f + a~ |Delta|^{alpha/2} f`` back from step ``t_from`` to 0.

    Each backward step is the exact discrete adjoint of the homogeneous
    forward step, so ``(f_0, xi_0) = (f_T, xi_T)`` holds to roundoff when the
    drift does not depend on the measure.
    """
    _require_all_steps(zeta_traj)
    grid = check_same_grid(f_T.grid, zeta_traj.grid, a.grid)
    zeta = zeta_traj.values
    if not 0 <= t_from < zeta.shape[0]:
        raise IndexError(f"t_from {t_from} outside the trajectory")
    f = np.array(f_T.values, dtype=float)
    for n in range(t_from - 1, -1, -1):
        op = step_operator(zeta_traj, n, spec, a, cfg, p)
        b = op.coefficient(0.5 * (zeta[n] + zeta[n + 1]))
        f = grid.fourier_multiply(f, op.decay)
        df = grid.derivative(f)
        update = b * df
        if op.has_rest:
            update -= op.a_rest * grid.fourier_multiply(f, op.lap)
        f = f + op.dt * update
    return TestFunction(grid, f)


# -- finite-difference oracles ---------------------------------------------------


def fd_first_order(Y: GridDensity, x: float, h: float, path: NoisePath, spec: DriftSpec, a: ScaleField,
                   noise: CommonNoiseSpec, cfg: SolverConfig, p: StableParams, snapshots=11,
                   base: np.ndarray | None = None) -> np.ndarray:
    """``(mu_t[Y + h delta_x] - mu_t[Y]) / h`` in the original frame, per retained time."""
    if base is None:
        base = solve_spde(Y, path, spec, a, noise, cfg, p, snapshots).values
    bumped = GridDensity(Y.grid, Y.values + h * dirac_approx(Y.grid, x).values, Y.signed)
    return (solve_spde(bumped, path, spec, a, noise, cfg, p, snapshots).values - base) / h


def fd_second_order(Y: GridDensity, x: float, z: float, h: float, path: NoisePath, spec: DriftSpec,
                    a: ScaleField, noise: CommonNoiseSpec, cfg: SolverConfig, p: StableParams,
                    snapshots=11) -> np.ndarray:
    """``(mu[Y+h(dx+dz)] - mu[Y+h dx] - mu[Y+h dz] + mu[Y]) / h^2`` per retained time."""
    grid = Y.grid
    dx, dz = dirac_approx(grid, x).values, dirac_approx(grid, z).values

    def run(values):
        return solve_spde(GridDensity(grid, values, Y.signed), path, spec, a, noise, cfg, p, snapshots).values

    y = Y.values
    return (run(y + h * (dx + dz)) - run(y + h * dx) - run(y + h * dz) + run(y)) / h ** 2


# -- noise-uniformity probe ------------------------------------------------------


@dataclass
class UniformityReport:
    seeds: list[int]
    sup_norms: list[float]

    @property
    def ratio(self) -> float:
        return max(self.sup_norms) / min(self.sup_norms)

    def as_dict(self) -> dict:
        return {"seeds": self.seeds, "sup_tv_norms": self.sup_norms, "max_min_ratio": self.ratio}


def uniformity_probe(scenario, seeds: Sequence[int]) -> UniformityReport:
    """Sup over sources and times of ``|xi_t(x; .)|_TV``, per common-noise seed.

    ``scenario`` is a :class:`mkvspde.scenarios.Scenario` with a non-empty
    ``sources`` list.
    """
    if len(seeds) < 3:
        raise ValueError("the uniformity probe needs at least three seeds")
    norms = []
    for seed in seeds:
        path = scenario.noise_path(seed)
        traj = scenario.solve_zeta(path, snapshots="all")
        xi = solve_xi(scenario.sources, traj, path, scenario.drift, scenario.scale, scenario.noise,
                      scenario.solver, scenario.stable, snapshots="all")
        norms.append(float(xi.tv_norms().max()))
    return UniformityReport(list(seeds), norms)


def xi_in_mu(xi: FirstOrderField, path: NoisePath, noise: CommonNoiseSpec) -> FirstOrderField:
    return field_to_mu(xi, path, noise)


def eta_in_mu(eta: SecondOrderField, path: NoisePath, noise: CommonNoiseSpec) -> SecondOrderField:
    return field_to_mu(eta, path, noise)
