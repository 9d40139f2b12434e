import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mkvspde.characteristics import CommonNoiseSpec
from mkvspde.drift import DriftSpec, InteractionKernel
from mkvspde.grid import DomainError, Grid1D, GridDensity, gaussian_density, l1_distance
from mkvspde.mkv_pde import (PicardError, SolverConfig, mild_picard_solve, retained_indices, solve_zeta,
                             stability_probe, step_count, step_density)
from mkvspde.operators import ScaleField, constant_scale
from mkvspde.stable import NoisePath, StableParams, sample_brownian_path, stable_evolve


def test_single_mode_step_is_exact(grid, stable):
    k = grid.k[3]
    Y = GridDensity(grid, (1 + 0.5 * np.cos(k * grid.x)) / 20.0)
    dt, a = 0.01, 1.3
    out = step_density(Y, 0.0, DriftSpec(), constant_scale(grid, a), CommonNoiseSpec(0.0), SolverConfig(dt), stable)
    expect = (1 + 0.5 * np.exp(-dt * a * k ** 1.5) * np.cos(k * grid.x)) / 20.0
    assert np.abs(out.values - expect).max() < 1e-12


def test_closed_form_free_evolution(grid, stable, bump):
    path = NoisePath.zero(1.0, 1000)
    traj = solve_zeta(bump, path, DriftSpec(), constant_scale(grid), CommonNoiseSpec(0.0), SolverConfig(1e-3),
                      stable)
    assert l1_distance(traj.final, stable_evolve(bump, 1.0, 1.0, stable)) < 1e-4
    assert traj.times[-1] == pytest.approx(1.0)


def test_constant_drift_is_a_galilean_shift(grid, stable, bump):
    c, T = 0.5, 0.5
    path = NoisePath.zero(T, 500)
    spec = DriftSpec("constant", {"value": c})
    traj = solve_zeta(bump, path, spec, constant_scale(grid), CommonNoiseSpec(0.0), SolverConfig(1e-3), stable)
    free = stable_evolve(bump, T, 1.0, stable)
    ref = free.with_values(grid.translate(free.values, c * T))
    assert l1_distance(traj.final, ref) < 2e-4


def test_mass_is_conserved(grid, stable, bump, gaussian_spec, wavy_scale):
    path = sample_brownian_path(0.25, 250, 3)
    traj = solve_zeta(bump, path, gaussian_spec, wavy_scale, CommonNoiseSpec(0.5), SolverConfig(1e-3), stable)
    assert traj.mass_drift() < 1e-12
    assert traj.max_undershoot() < 1e-6
    assert traj.tv_norms.max() <= bump.mass * (1 + 1e-6)


def test_measure_independent_drift_needs_one_iteration(grid, stable, bump, sine_spec, wavy_scale):
    path = sample_brownian_path(0.1, 100, 0)
    traj = solve_zeta(bump, path, sine_spec, wavy_scale, CommonNoiseSpec(0.5), SolverConfig(1e-3), stable)
    assert np.all(traj.picard_iterations == 1)


def test_interacting_drift_converges_in_a_few_iterations(grid, stable, bump, gaussian_spec):
    path = sample_brownian_path(0.05, 50, 0)
    traj = solve_zeta(bump, path, gaussian_spec, constant_scale(grid), CommonNoiseSpec(0.5), SolverConfig(1e-3),
                      stable)
    assert 1 < traj.picard_iterations.max() <= 10


def test_picard_failure_is_reported(grid, stable, bump, gaussian_spec):
    path = NoisePath.zero(0.01, 10)
    cfg = SolverConfig(1e-3, picard_tol=1e-300, picard_max_iter=2)
    with pytest.raises(PicardError) as err:
        solve_zeta(bump, path, gaussian_spec, constant_scale(grid), CommonNoiseSpec(0.0), cfg, stable)
    assert err.value.residual > 0


@given(st.floats(0.1, 3.0), st.floats(-3, 3))
def test_linear_dynamics_are_linear(scale, center):
    grid = Grid1D(10.0, 64)
    p = StableParams(1.4)
    spec = DriftSpec("sine", {"amplitude": 0.5, "frequency": float(grid.k[1])})
    a = ScaleField(grid, "cosine", {"mean": 1.0, "amplitude": 0.2, "frequency": float(grid.k[1])})
    path = sample_brownian_path(0.05, 50, 1)
    args = (path, spec, a, CommonNoiseSpec(0.5), SolverConfig(1e-3), p, 2)
    Y1, Y2 = gaussian_density(grid, center, 1.0), gaussian_density(grid, 0.0, 0.5)
    f1 = solve_zeta(Y1, *args).final.values
    f2 = solve_zeta(Y2, *args).final.values
    fs = solve_zeta(Y1 * scale + Y2, *args).final.values
    assert np.abs(fs - (scale * f1 + f2)).max() < 1e-10


def test_mild_form_matches_imex(grid, stable, bump, gaussian_spec):
    path = sample_brownian_path(0.25, 250, 5)
    noise, cfg = CommonNoiseSpec(0.5), SolverConfig(1e-3)
    imex = solve_zeta(bump, path, gaussian_spec, constant_scale(grid), noise, cfg, stable)
    mild = mild_picard_solve(bump, path, gaussian_spec, 1.0, noise, cfg, stable)
    assert np.array_equal(imex.times, mild.times)
    assert max(l1_distance(imex.density(i), mild.density(i)) for i in range(len(imex))) < 5e-3


def test_mild_form_without_drift_is_exact(grid, stable, bump):
    path = NoisePath.zero(0.5, 50)
    mild = mild_picard_solve(bump, path, DriftSpec(), 0.8, CommonNoiseSpec(0.0), SolverConfig(1e-2), stable)
    assert l1_distance(mild.final, stable_evolve(bump, 0.5, 0.8, stable)) < 1e-12
    with pytest.raises(DomainError):
        mild_picard_solve(bump, path, DriftSpec(), 0.0, CommonNoiseSpec(0.0), SolverConfig(1e-2), stable)


def test_stability_probe(grid, stable, bump):
    path = NoisePath.zero(0.2, 200)
    other = gaussian_density(grid, 1.0, 0.7)
    ratio = stability_probe(bump, other, path, DriftSpec(), constant_scale(grid), CommonNoiseSpec(0.0),
                            SolverConfig(1e-3), stable)
    # a Markov semigroup contracts L1 and the first recorded step is t = 0
    assert ratio == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        stability_probe(bump, bump, path, DriftSpec(), constant_scale(grid), CommonNoiseSpec(0.0),
                        SolverConfig(1e-3), stable)


def test_first_order_in_time():
    grid = Grid1D(10.0, 128)
    p = StableParams(1.5)
    Y = gaussian_density(grid, 0.0, 1.0)
    spec = DriftSpec("sine", {"amplitude": 0.5, "frequency": np.pi / 5},
                     [(0.5, InteractionKernel("gaussian", {"width": 1.0}))])
    a = ScaleField(grid, "cosine", {"mean": 1.0, "amplitude": 0.2, "frequency": np.pi / 10})
    finals = []
    for n in (50, 100, 200, 400):
        path = NoisePath.zero(0.5, n)
        finals.append(solve_zeta(Y, path, spec, a, CommonNoiseSpec(0.0), SolverConfig(0.5 / n), p, 2).final)
    d = [l1_distance(finals[i], finals[i + 1]) for i in range(3)]
    assert d[0] / d[1] >= 1.8 and d[1] / d[2] >= 1.8


def test_retained_indices_and_step_count():
    assert retained_indices(10, 3).tolist() == [0, 5, 10]
    assert retained_indices(4, "all").tolist() == [0, 1, 2, 3, 4]
    with pytest.raises(DomainError):
        retained_indices(4, 1)
    assert step_count(1.0, 1e-3) == 1000
    with pytest.raises(DomainError):
        step_count(1.0, 0.3)


def test_noise_path_must_nest(grid, stable, bump):
    with pytest.raises(DomainError):
        solve_zeta(bump, NoisePath.zero(1.0, 3), DriftSpec(), constant_scale(grid), CommonNoiseSpec(0.0),
                   SolverConfig(0.5), stable)


def test_export(tmp_path, grid, stable, bump):
    traj = solve_zeta(bump, NoisePath.zero(0.1, 10), DriftSpec(), constant_scale(grid), CommonNoiseSpec(0.0),
                      SolverConfig(1e-2), stable, snapshots=3)
    written = traj.export(tmp_path, prefix="zeta")
    assert [p.name for p in written] == ["zeta_000.csv", "zeta_001.csv", "zeta_002.csv", "zeta_diagnostics.json"]
    back = GridDensity.from_csv(written[-2], grid.half_width)
    assert np.array_equal(back.values, traj.values[-1])
    diag = json.loads(written[-1].read_text())
    assert diag["times"] == traj.times.tolist() and len(diag["mass"]) == 11
