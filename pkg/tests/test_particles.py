import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mkvspde.characteristics import CommonNoiseSpec
from mkvspde.drift import DriftSpec
from mkvspde.grid import DomainError, Grid1D, GridDensity, dirac_approx, gaussian_density, l1_distance
from mkvspde.mkv_pde import SolverConfig
from mkvspde.operators import constant_scale
from mkvspde.particles import (ParticleState, chaos_distance, default_bandwidth, empirical_density,
                               export_chaos_series, export_states, sample_initial, simulate_particles,
                               wasserstein1_samples, wasserstein1_to_grid)
from mkvspde.spde import solve_spde
from mkvspde.stable import StableParams, rng_stream, sample_brownian_path, stable_evolve

GRID = Grid1D(10.0, 128)
P = StableParams(1.5)
Y = gaussian_density(GRID, 0.0, 1.0)


def test_state_is_frozen_and_finite():
    s = ParticleState([0.0, 1.0], 0.5)
    assert s.n == 2
    with pytest.raises(ValueError):
        s.positions[0] = 3.0
    with pytest.raises(ValueError):
        ParticleState([np.nan], 0.0)


def test_kde_has_unit_mass_and_a_bump():
    dens = empirical_density(ParticleState([0.0], 0.0), GRID, 0.5)
    assert dens.mass == pytest.approx(1.0, abs=1e-13)
    assert GRID.x[np.argmax(dens.values)] == 0.0
    with pytest.raises(DomainError):
        empirical_density(ParticleState([0.0], 0.0), GRID, 0.0)


def test_kde_of_gaussian_samples():
    x = np.random.default_rng(0).normal(size=10_000)
    bw = default_bandwidth(x, GRID.h)
    assert bw == pytest.approx(1.06 * np.std(x) * 10_000 ** -0.2)
    dens = empirical_density(ParticleState(x, 0.0), GRID, bw)
    assert l1_distance(dens, Y) < 0.05


def test_bandwidth_floor():
    assert default_bandwidth(np.zeros(5), GRID.h) == GRID.h
    assert default_bandwidth(np.zeros(1), 0.3) == 0.3


def test_initial_sampling_follows_the_density():
    rng = np.random.default_rng(1)
    x = np.array([sample_initial(Y, rng) for _ in range(4000)])
    assert abs(x.mean()) < 0.1 and abs(x.std() - 1.0) < 0.05
    point = dirac_approx(GRID, GRID.x[70])
    y = np.array([sample_initial(point, rng) for _ in range(50)])
    assert np.all(np.abs(y - GRID.x[70]) <= GRID.h / 2)


def test_w1_trivial_cases():
    assert chaos_distance(ParticleState([0.5, 0.5], 0.0), np.array([0.5, 0.5])) == 0.0
    assert chaos_distance(np.array([0.0]), np.array([1.0])) == pytest.approx(1.0)
    assert wasserstein1_samples([0.0, 2.0], [1.0, 3.0]) == pytest.approx(1.0)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_w1_of_translates(a, b):
    x = np.random.default_rng(2).normal(size=50)
    assert wasserstein1_samples(x + a, x + b) == pytest.approx(abs(a - b), abs=1e-9)


def test_w1_to_grid_of_cell_uniform_samples():
    # samples spread evenly over one cell reproduce its uniform law
    j = 64
    xs = GRID.x[j] + GRID.h * ((np.arange(1000) + 0.5) / 1000 - 0.5)
    # each sample sits mid-way in a slot of width h/1000: W1 = h / 4000
    assert wasserstein1_to_grid(xs, dirac_approx(GRID, GRID.x[j])) == pytest.approx(GRID.h / 4000, rel=1e-9)
    assert wasserstein1_to_grid(np.array([GRID.x[j] + 1.0]), dirac_approx(GRID, GRID.x[j])) \
        == pytest.approx(1.0, abs=GRID.h / 4)


def test_w1_to_grid_for_exact_samples():
    n = 4000
    x = np.random.default_rng(3).normal(size=n)
    # the standard deviation of W1 for N draws is of order N^(-1/2) times the spread
    assert chaos_distance(x, Y) < 3 * n ** -0.5


def _run(n, seed=5, sigma=0.5, spec=DriftSpec(), path=None, **kw):
    path = path or sample_brownian_path(0.1, 50, 9)
    return simulate_particles(n, Y, path, spec, constant_scale(GRID), CommonNoiseSpec(sigma), P, seed, **kw)


def test_simulation_is_deterministic():
    a, b = _run(20), _run(20)
    assert len(a) == 11 and a[-1].t == pytest.approx(0.1)
    assert all(np.array_equal(x.positions, y.positions) for x, y in zip(a, b))
    assert not np.array_equal(_run(20, seed=6)[-1].positions, a[-1].positions)


def test_stream_indices_permute_particles(gaussian_spec):
    perm = np.array([3, 1, 4, 0, 2])
    # with interaction the empirical measure is permutation invariant
    a = _run(5, spec=gaussian_spec)[-1].positions
    b = _run(5, spec=gaussian_spec, stream_indices=perm)[-1].positions
    assert np.allclose(b, a[perm], atol=1e-12)
    with pytest.raises(ValueError):
        _run(5, stream_indices=[0, 1])


def test_particles_are_independent_of_the_ensemble_size_without_interaction():
    big = _run(40)[-1].positions
    small = _run(3, stream_indices=[7, 21, 39])[-1].positions
    assert np.array_equal(small, big[[7, 21, 39]])


def test_common_noise_moves_every_particle():
    path = sample_brownian_path(0.1, 50, 9)
    with_noise = _run(30, sigma=0.5, path=path)[-1].positions
    without = _run(30, sigma=0.0, path=path)[-1].positions
    shifted = GRID.wrap(without + 0.5 * path.values[-1])
    assert np.allclose(GRID.wrap_difference(with_noise - shifted), 0.0, atol=1e-12)


def test_free_particles_sample_the_spde_solution():
    n = 10_000
    path = sample_brownian_path(0.2, 100, 4)
    states = simulate_particles(n, Y, path, DriftSpec(), constant_scale(GRID), CommonNoiseSpec(0.5), P, 1,
                                snapshots=2)
    mu = solve_spde(Y, path, DriftSpec(), constant_scale(GRID), CommonNoiseSpec(0.5), SolverConfig(2e-3), P,
                    snapshots=2)
    free = stable_evolve(Y, 0.2, 1.0, P)
    assert l1_distance(mu.final, free.with_values(GRID.translate(free.values, 0.5 * path.values[-1]))) < 1e-12
    assert chaos_distance(states[-1], mu.final) < 3 * n ** -0.5 * 1.5


def test_interacting_particles_track_the_grid_solution(gaussian_spec):
    n = 1000
    path = sample_brownian_path(0.1, 100, 4)
    states = simulate_particles(n, Y, path, gaussian_spec, constant_scale(GRID), CommonNoiseSpec(0.5), P, 2,
                                snapshots=3)
    mu = solve_spde(Y, path, gaussian_spec, constant_scale(GRID), CommonNoiseSpec(0.5), SolverConfig(1e-3), P,
                    snapshots=3)
    assert all(chaos_distance(s, mu.density(i)) < 0.15 for i, s in enumerate(states))


def test_rejects_empty_ensemble():
    with pytest.raises(DomainError):
        _run(0)


def test_exports(tmp_path):
    states = _run(4, snapshots=2)
    paths = export_states(states, tmp_path / "p")
    assert [p.name for p in paths] == ["particles_000.csv", "particles_001.csv"]
    lines = paths[-1].read_text().splitlines()
    assert lines[0] == "index,position" and len(lines) == 5
    out = export_chaos_series([0.0, 0.1], [0.2, 0.3], tmp_path / "w1.json")
    assert json.loads(out.read_text()) == {"times": [0.0, 0.1], "w1": [0.2, 0.3]}
