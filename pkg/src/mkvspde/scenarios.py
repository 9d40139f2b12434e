"""Concrete model instances built from configuration documents.

The built-in scenarios are ordinary configuration documents, so they go
through the same validation as user files.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .characteristics import CommonNoiseSpec
from .config import ExperimentConfig, from_mapping
from .drift import DriftSpec, InteractionKernel
from .grid import Grid1D, GridDensity, dirac_approx, gaussian_density
from .mkv_pde import DensityTrajectory, SolverConfig, solve_zeta, step_count
from .operators import ScaleField
from .spde import solve_spde
from .stable import NoisePath, StableParams, sample_brownian_path, stream_seed

COMMON_ROLE = "common"


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    grid: Grid1D
    stable: StableParams
    scale: ScaleField
    drift: DriftSpec
    noise: CommonNoiseSpec
    initial: GridDensity
    horizon: float
    solver: SolverConfig
    snapshots: int = 11
    sources: tuple = ()
    pairs: tuple = ()

    @classmethod
    def from_config(cls, cfg: ExperimentConfig) -> "Scenario":
        grid = Grid1D(cfg.grid.half_width, cfg.grid.n_points)
        scale = ScaleField(grid, cfg.scale.profile, cfg.scale.params, cfg.scale.bound)
        terms = tuple((k.weight, InteractionKernel(k.name, k.params)) for k in cfg.drift.kernels)
        drift = DriftSpec(cfg.drift.base, cfg.drift.base_params, terms, cfg.drift.outer)
        ini = cfg.initial
        if ini.kind == "gaussian":
            Y = gaussian_density(grid, ini.center, ini.std, ini.mass)
        else:
            Y = dirac_approx(grid, ini.center) * ini.mass
        solver = SolverConfig(cfg.time.dt, cfg.solver.picard_tol, cfg.solver.picard_max_iter, cfg.solver.imex)
        sens = cfg.sensitivity
        return cls(cfg.name, grid, StableParams(cfg.model.alpha), scale, drift,
                   CommonNoiseSpec(cfg.model.sigma_com), Y, cfg.time.horizon, solver, cfg.time.snapshots,
                   tuple(float(x) for x in sens.sources) if sens else (),
                   tuple((float(x), float(z)) for x, z in sens.pairs) if sens else ())

    @property
    def n_steps(self) -> int:
        return step_count(self.horizon, self.solver.dt)

    def noise_path(self, seed: int, n_steps: int | None = None) -> NoisePath:
        """Brownian path for common-noise seed ``seed`` on the solver grid."""
        return sample_brownian_path(self.horizon, n_steps or self.n_steps, seed)

    def solve_zeta(self, path: NoisePath, snapshots=None) -> DensityTrajectory:
        return solve_zeta(self.initial, path, self.drift, self.scale, self.noise, self.solver, self.stable,
                          self.snapshots if snapshots is None else snapshots)

    def solve_spde(self, path: NoisePath, snapshots=None) -> DensityTrajectory:
        return solve_spde(self.initial, path, self.drift, self.scale, self.noise, self.solver, self.stable,
                          self.snapshots if snapshots is None else snapshots)

    def with_initial(self, Y: GridDensity) -> "Scenario":
        return Scenario(self.name, self.grid, self.stable, self.scale, self.drift, self.noise, Y, self.horizon,
                        self.solver, self.snapshots, self.sources, self.pairs)


def common_noise_seed(master_seed: int, index: int = 0) -> int:
    return stream_seed(master_seed, COMMON_ROLE, index)


# Sources sit on grid nodes of the default 256-point grid on [-10, 10).
_INTERACTING = {
    "name": "interacting",
    "grid": {"half_width": 10.0, "n_points": 256},
    "model": {"alpha": 1.5, "sigma_com": 0.5},
    "scale": {"profile": "cosine", "params": {"mean": 1.0, "amplitude": 0.2, "frequency": float(np.pi / 10)}},
    "drift": {"kernels": [{"name": "gaussian", "weight": 0.5, "params": {"width": 1.0}}]},
    "time": {"horizon": 0.5, "dt": 1e-3},
    "sensitivity": {"sources": [-1.015625, 0.0, 0.859375], "pairs": [[-1.015625, 0.46875], [0.0, 1.015625]],
                    "fd_steps": [1e-2, 1e-3]},
}

BUILTIN_SCENARIOS = {
    "smoke": {
        "name": "smoke",
        "grid": {"half_width": 10.0, "n_points": 128},
        "model": {"alpha": 1.5},
        "time": {"horizon": 0.25, "dt": 2.5e-3, "snapshots": 6},
        "checks": {"closed_form": 1e-4},
    },
    "closed_form": {
        "name": "closed_form",
        "grid": {"half_width": 10.0, "n_points": 256},
        "model": {"alpha": 1.5},
        "time": {"horizon": 1.0, "dt": 1e-3},
        "checks": {"closed_form": 1e-4},
    },
    "interacting": _INTERACTING,
    "quadratic": {
        **_INTERACTING,
        "name": "quadratic",
        "drift": {"kernels": [{"name": "quadratic_gaussian", "weight": 0.5, "params": {"width": 1.0}}]},
        "time": {"horizon": 0.25, "dt": 1e-3},
    },
    "linear": {
        "name": "linear",
        "grid": {"half_width": 10.0, "n_points": 256},
        "model": {"alpha": 1.2, "sigma_com": 0.5},
        "scale": {"profile": "cosine", "params": {"mean": 1.0, "amplitude": 0.3, "frequency": float(np.pi / 5)}},
        "drift": {"base": "sine", "base_params": {"amplitude": 0.5, "frequency": float(np.pi / 5)}},
        "time": {"horizon": 0.5, "dt": 1e-3},
    },
    "ito": {
        "name": "ito",
        "grid": {"half_width": 10.0, "n_points": 128},
        "model": {"alpha": 1.5, "sigma_com": 1.0},
        "time": {"horizon": 0.5, "dt": 2e-3},
        "compare": {"refinements": 3, "milstein": True},
    },
}


def builtin_config(name: str) -> ExperimentConfig:
    if name not in BUILTIN_SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; built-ins: {sorted(BUILTIN_SCENARIOS)}")
    return from_mapping(copy.deepcopy(BUILTIN_SCENARIOS[name]))


def builtin(name: str) -> Scenario:
    return Scenario.from_config(builtin_config(name))
