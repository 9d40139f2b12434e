import numpy as np
import pytest
from hypothesis import given, strategies as st

from mkvspde.drift import (KERNELS, BoundDrift, DriftSpec, InteractionKernel, drift_first_vd, drift_second_vd,
                           eval_drift, eval_drift_at, validate_conditions)
from mkvspde.grid import Grid1D, GridDensity, dirac_approx, gaussian_density
from mkvspde.operators import ScaleField, constant_scale


def _dense_drift(spec, points, grid, mu):
    """Brute-force tensor quadrature of the drift, straight from its definition."""
    out = spec.base_drift(points).astype(float)
    h = grid.h
    for w, k in spec.active_terms:
        d = grid.wrap(np.subtract.outer(points, grid.x))
        if k.order == 1:
            out = out + w * h * (k.profile(d) @ mu)
        else:
            phi = k.profile(d)
            out = out + w * h * h * np.einsum("ij,ik,j,k->i", phi, phi, mu, mu)
    return out


def test_unknown_kernel_lists_registry():
    with pytest.raises(KeyError, match="known kernels"):
        InteractionKernel("yukawa")


def test_kernel_rejects_bad_params():
    with pytest.raises(TypeError):
        InteractionKernel("gaussian", {"sigma": 1.0})


def test_non_affine_outer_not_implemented():
    with pytest.raises(NotImplementedError):
        DriftSpec(outer="softplus")


def test_order_two_kernel_symmetric():
    k = InteractionKernel("quadratic_gaussian", {"width": 0.8})
    assert k(0.3, 1.1, -0.4) == k(0.3, -0.4, 1.1)
    with pytest.raises(TypeError):
        k(0.3, 1.0)


def test_measure_independent_drift(grid, bump):
    spec = DriftSpec("sine", {"amplitude": 1.0, "frequency": 1.0})
    assert np.allclose(eval_drift(spec, bump).values, np.sin(grid.x), atol=1e-15)
    zero = DriftSpec(terms=[(0.0, InteractionKernel("gaussian"))])
    assert zero.measure_independent
    assert np.all(eval_drift(zero, bump).values == 0.0)


def test_dirac_measure_recovers_kernel_to_second_order():
    y0 = 0.37
    errs = []
    for n in (128, 256, 512):
        g = Grid1D(10.0, n)
        spec = DriftSpec(terms=[(1.0, InteractionKernel("gaussian", {"width": 1.0}))])
        b = eval_drift(spec, dirac_approx(g, y0)).values
        errs.append(np.abs(b - spec.terms[0][1](g.x, y0)).max())
    h = 20.0 / np.array([128, 256, 512])
    assert np.all(np.array(errs) < h ** 2)


@pytest.mark.parametrize("name,params", [("gaussian", {"width": 0.7}), ("cosine", {"frequency": np.pi / 5}),
                                         ("gaussian_attraction", {"width": 1.0}),
                                         ("quadratic_gaussian", {"width": 1.2}),
                                         ("quadratic_cosine", {"frequency": np.pi / 10})])
def test_fft_and_matrix_paths_match_dense_quadrature(grid, name, params):
    spec = DriftSpec("sine", {"amplitude": 0.3}, [(0.8, InteractionKernel(name, params))])
    mu = gaussian_density(grid, 1.0, 1.5).values + 0.3 * dirac_approx(grid, -2.0).values
    for shift in (0.0, 0.4321):
        on_grid = BoundDrift.on_grid(spec, grid, shift).value(mu)
        dense = _dense_drift(spec, grid.x + shift, grid, mu)
        assert np.abs(on_grid - dense).max() < 1e-12
    pts = np.array([-9.99, -0.5, 0.0, 3.14159, 9.9])
    assert np.allclose(eval_drift_at(spec, pts, GridDensity(grid, mu)), _dense_drift(spec, pts, grid, mu),
                       atol=1e-12)


def test_first_vd_linear_kernel_is_kernel(grid, bump):
    spec = DriftSpec(terms=[(0.5, InteractionKernel("gaussian", {"width": 1.0}))])
    z = grid.x[140]
    v1 = drift_first_vd(spec, bump, z).values
    v2 = drift_first_vd(spec, 3.0 * bump, z).values
    assert np.array_equal(v1, v2)
    assert np.allclose(v1, 0.5 * np.exp(-0.5 * grid.wrap(grid.x - z) ** 2), atol=1e-14)
    assert np.all(drift_first_vd(DriftSpec("sine"), bump, z).values == 0.0)


def test_first_vd_quadratic_matches_closed_form_and_fd(grid, bump):
    spec = DriftSpec(terms=[(0.5, InteractionKernel("quadratic_gaussian", {"width": 1.0}))])
    z = grid.x[150]
    v = drift_first_vd(spec, bump, z).values
    phi = np.exp(-0.5 * grid.wrap(np.subtract.outer(grid.x, grid.x)) ** 2)
    closed = 2 * 0.5 * phi[:, 150] * (grid.h * phi @ bump.values)
    assert np.abs(v - closed).max() < 1e-12
    eps = 1e-3
    bumped = GridDensity(grid, bump.values + eps * dirac_approx(grid, z).values)
    fd = (eval_drift(spec, bumped).values - eval_drift(spec, bump).values) / eps
    assert np.abs(fd - v).max() < 10 * eps * np.abs(v).max()


@given(st.integers(0, 2 ** 31))
def test_first_vd_directional_fd_property(seed):
    g = Grid1D(10.0, 64)
    rng = np.random.default_rng(seed)
    spec = DriftSpec(terms=[(0.7, InteractionKernel("quadratic_gaussian", {"width": 1.0})),
                            (0.3, InteractionKernel("cosine", {"frequency": float(g.k[1])}))])
    mu = GridDensity(g, gaussian_density(g, rng.uniform(-3, 3), rng.uniform(0.5, 2)).values)
    z = g.x[rng.integers(64)]
    v = drift_first_vd(spec, mu, z).values
    errs = []
    for eps in (1e-2, 1e-3):
        bumped = GridDensity(g, mu.values + eps * dirac_approx(g, z).values)
        fd = (eval_drift(spec, bumped).values - eval_drift(spec, mu).values) / eps
        errs.append(np.abs(fd - v).max() / np.abs(v).max())
    assert errs[1] < 10 * 1e-3
    assert errs[1] < errs[0]


def test_second_vd(grid, bump):
    lin = DriftSpec(terms=[(0.5, InteractionKernel("gaussian"))])
    assert np.all(drift_second_vd(lin, bump, grid.x[10], grid.x[20]).values == 0.0)
    spec = DriftSpec(terms=[(0.5, InteractionKernel("quadratic_gaussian", {"width": 1.0}))])
    z, u = grid.x[120], grid.x[135]
    a = drift_second_vd(spec, bump, z, u).values
    assert np.array_equal(a, drift_second_vd(spec, bump, u, z).values)
    dz, du = dirac_approx(grid, z).values, dirac_approx(grid, u).values
    eps = 1e-2
    b = lambda extra: eval_drift(spec, GridDensity(grid, bump.values + extra)).values
    second = (b(eps * (dz + du)) - b(eps * dz) - b(eps * du) + b(0.0)) / eps ** 2
    # the second difference of a quadratic functional is exact
    assert np.abs(second - a).max() < 1e-6 * np.abs(a).max()
    closed = 2 * 0.5 * np.exp(-0.5 * (grid.x - z) ** 2) * np.exp(-0.5 * (grid.x - u) ** 2)
    assert np.abs(a - closed).max() < 1e-12


def test_third_differences_vanish(grid, bump):
    spec = DriftSpec(terms=[(0.5, InteractionKernel("quadratic_gaussian")), (0.2, InteractionKernel("cosine"))])
    dirs = [dirac_approx(grid, grid.x[j]).values for j in (100, 128, 160)]
    eps = 1e-2
    total = np.zeros(grid.n_points)
    for mask in range(8):
        picked = [d for i, d in enumerate(dirs) if mask >> i & 1]
        sign = (-1) ** (3 - len(picked))
        total += sign * eval_drift(spec, GridDensity(grid, bump.values + eps * sum(picked, np.zeros(256)))).values
    assert np.abs(total / eps ** 3).max() < 1e-4


def test_validate_conditions(grid):
    spec = DriftSpec("sine", {"amplitude": 1.0}, [(0.5, InteractionKernel("gaussian", {"width": 1.0}))])
    rep = validate_conditions(spec, constant_scale(grid), lam=1.0, n_probes=1000)
    assert rep.passed and rep.n_probes == 1000
    assert 0 < rep.sup_drift < np.inf and rep.lipschitz_x > 0 and rep.sup_first_vd == pytest.approx(0.5)
    # sup of |b| is attained by a full-mass Dirac: |sin| + 0.5 <= 1.5
    assert rep.sup_drift <= 1.5 + 1e-12

    bad = ScaleField(grid, "cosine", {"mean": 1.0, "amplitude": 0.9})
    assert any(v.startswith("C1") for v in validate_conditions(spec, bad, 1.0, n_probes=10).violations)

    zero = validate_conditions(DriftSpec(), constant_scale(grid), 1.0, n_probes=50)
    assert zero.passed
    assert zero.sup_drift == zero.lipschitz_x == zero.sup_first_vd == zero.sup_second_vd == 0.0


def test_registry_kernels_have_declared_order():
    assert {n for n, (o, _) in KERNELS.items() if o == 2} == {"quadratic_gaussian", "quadratic_cosine"}
