import numpy as np
import pytest
from hypothesis import given, strategies as st

from mkvspde.grid import (DomainError, Grid1D, GridDensity, GridMismatchError, TestFunction, dirac_approx,
                          gaussian_density, l1_distance, pairing, total_mass, tv_norm)


@pytest.mark.parametrize("n", [4, 100, 0, 7])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        Grid1D(10.0, n)


def test_grid_basics(grid):
    assert grid.h == pytest.approx(20.0 / 256)
    assert grid.x[0] == -10.0 and grid.x[-1] == pytest.approx(10.0 - grid.h)
    assert grid.k[1] == pytest.approx(np.pi / 10)
    assert grid.wrap(10.0) == -10.0
    assert grid.wrap(-10.5) == pytest.approx(9.5)


def test_grid_mismatch_is_rejected(grid, small_grid):
    f = TestFunction(grid, np.ones(256))
    mu = GridDensity(small_grid, np.ones(64))
    with pytest.raises(GridMismatchError):
        pairing(f, mu)
    with pytest.raises(GridMismatchError):
        l1_distance(gaussian_density(grid), mu)


def test_unsigned_density_rejects_undershoot(grid):
    values = np.ones(256)
    values[3] = -1e-3
    with pytest.raises(ValueError):
        GridDensity(grid, values)
    assert GridDensity(grid, values, signed=True).values[3] == -1e-3


def test_pairing_examples(grid, bump):
    one = TestFunction(grid, np.ones(256))
    assert pairing(one, bump) == pytest.approx(1.0, abs=1e-14)
    odd = TestFunction.from_callable(grid, lambda x: x)
    assert abs(pairing(odd, bump)) < 1e-12
    # second moment of the standard normal
    sq = TestFunction.from_callable(grid, lambda x: x ** 2)
    assert pairing(sq, bump) == pytest.approx(1.0, abs=1e-6)


def test_total_mass_examples(grid):
    assert total_mass(GridDensity(grid, np.full(256, 1 / 20))) == pytest.approx(1.0, abs=1e-14)
    assert total_mass(GridDensity(grid, np.zeros(256))) == 0.0
    for x0 in (-10.0, -3.3, 0.0, 9.99):
        assert total_mass(dirac_approx(grid, x0)) == pytest.approx(1.0, abs=1e-12)


def test_l1_distance_examples(grid, bump):
    assert l1_distance(bump, bump) == 0.0
    assert l1_distance(bump, 2.0 * bump) == pytest.approx(1.0, abs=1e-12)
    left = GridDensity(grid, np.where(grid.x < -1, 1.0, 0.0))
    right = GridDensity(grid, np.where(grid.x > 1, 1.0, 0.0))
    left, right = left * (1 / left.mass), right * (1 / right.mass)
    assert l1_distance(left, right) == pytest.approx(2.0, abs=1e-12)


def test_dirac_at_cell_center_is_single_cell(grid):
    d = dirac_approx(grid, grid.x[77])
    assert np.count_nonzero(d.values) == 1
    assert d.values[77] == pytest.approx(1.0 / grid.h)


def test_dirac_outside_domain(grid):
    with pytest.raises(DomainError):
        dirac_approx(grid, 10.0)
    with pytest.raises(DomainError):
        dirac_approx(grid, -10.01)


def test_dirac_pairing_is_second_order():
    # the hat split interpolates linearly; its h^2 bound is attained as a sup over x0
    points = np.linspace(-2.0, 2.0, 401)
    errs = []
    for n in (64, 128, 256):
        g = Grid1D(10.0, n)
        f = TestFunction.from_callable(g, np.cos)
        errs.append(max(abs(pairing(f, dirac_approx(g, x0)) - np.cos(x0)) for x0 in points))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


@given(st.floats(-10.0, 10.0, exclude_max=True))
def test_dirac_mass_property(x0):
    g = Grid1D(10.0, 128)
    assert total_mass(dirac_approx(g, x0)) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 31))
def test_pairing_bilinear(a, b, seed):
    g = Grid1D(5.0, 32)
    rng = np.random.default_rng(seed)
    f, h = TestFunction(g, rng.normal(size=32)), TestFunction(g, rng.normal(size=32))
    mu = GridDensity(g, rng.normal(size=32), signed=True)
    lhs = pairing(a * f + b * h, mu)
    rhs = a * pairing(f, mu) + b * pairing(h, mu)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(lhs)))


@given(st.integers(0, 2 ** 31))
def test_l1_triangle_inequality(seed):
    g = Grid1D(5.0, 32)
    rng = np.random.default_rng(seed)
    a, b, c = (GridDensity(g, rng.normal(size=32), signed=True) for _ in range(3))
    assert l1_distance(a, c) <= l1_distance(a, b) + l1_distance(b, c) + 1e-12


def test_tv_norm_of_signed(grid):
    v = GridDensity(grid, np.where(grid.x < 0, -1.0, 1.0), signed=True)
    assert tv_norm(v) == pytest.approx(20.0)
    assert total_mass(v) == pytest.approx(0.0, abs=1e-12)


def test_serialization_roundtrip(tmp_path, grid, bump):
    blob = bump.to_bytes()
    back = GridDensity.from_bytes(blob)
    assert np.array_equal(back.values, bump.values) and back.grid.same_as(grid)
    # header: magic, L, n, h, signed, little-endian
    assert blob[:4] == b"MKVD" and len(blob) == 4 + 8 + 8 + 8 + 1 + 8 * 256
    bump.to_csv(tmp_path / "d.csv")
    again = GridDensity.from_csv(tmp_path / "d.csv", grid.half_width)
    assert np.array_equal(again.values, bump.values)
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "x,value"


def test_translate_grid_aligned_is_roll(grid, bump):
    moved = grid.translate(bump.values, grid.h)
    assert np.abs(moved - np.roll(bump.values, 1)).max() < 1e-10


def test_wrap_difference_matches_wrap(grid):
    rng = np.random.default_rng(1)
    a, b = rng.uniform(-10, 10, 50), rng.uniform(-10, 10, 50)
    d = np.subtract.outer(a, b)
    assert np.allclose(grid.wrap_difference(d), grid.wrap(d), atol=1e-12)
