"""Fractional Laplacian, scale coefficients and the stable-like generator.

``|Delta|^{alpha/2}`` always means the nonnegative operator with Fourier
symbol ``|k|^alpha``.  Two realizations are provided: the spectral multiplier
used by the solvers and an independent singular-integral quadrature used to
cross-check it and to pin the normalization constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import gamma, pi, sqrt
from typing import Mapping

import numpy as np

from .grid import DomainError, Grid1D, GridDensity, TestFunction, check_same_grid
from .stable import StableParams


def c_alpha(alpha: float) -> float:
    """1-D normalization of the singular-integral form of ``|Delta|^{alpha/2}``."""
    return 2.0 ** alpha * gamma((1.0 + alpha) / 2.0) / (sqrt(pi) * abs(gamma(-alpha / 2.0)))


# -- scale coefficient a(x) ---------------------------------------------------

def _constant_profile(x, value=1.0):
    return np.full(np.shape(x), float(value))


def _cosine_profile(x, mean=1.0, amplitude=0.1, frequency=1.0, phase=0.0):
    return mean + amplitude * np.cos(frequency * np.asarray(x) + phase)


SCALE_PROFILES = {
    "constant": _constant_profile,
    "cosine": _cosine_profile,
}


@dataclass(frozen=True, eq=False)
class ScaleField:
    """Closed-form scale coefficient ``a(x + offset)`` sampled on a grid.

    ``bound`` is the constant ``M > 1`` of the two-sided bound
    ``1/M <= a <= M``.  The field does not enforce it; see
    :meth:`c1_violations`.
    """

    grid: Grid1D
    profile: str = "constant"
    params: Mapping[str, float] = field(default_factory=dict)
    bound: float = 2.0
    offset: float = 0.0

    def __post_init__(self):
        if self.profile not in SCALE_PROFILES:
            raise KeyError(f"unknown scale profile {self.profile!r}; known: {sorted(SCALE_PROFILES)}")
        if not self.bound > 1.0:
            raise DomainError(f"scale bound M must exceed 1, got {self.bound}")
        object.__setattr__(self, "params", dict(self.params))

    def at(self, points) -> np.ndarray:
        return SCALE_PROFILES[self.profile](np.asarray(points, dtype=float) + self.offset, **self.params)

    @cached_property
    def values(self) -> np.ndarray:
        v = self.at(self.grid.x)
        v.setflags(write=False)
        return v

    @property
    def is_constant(self) -> bool:
        return self.profile == "constant"

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def shifted(self, s: float) -> "ScaleField":
        """The field ``x -> a(x + s)``."""
        return ScaleField(self.grid, self.profile, self.params, self.bound, self.offset + s)

    def c1_violations(self, n_probe: int = 4096) -> list[str]:
        # probe finer than the grid as well; a is a closed form
        probe = np.linspace(-self.grid.half_width, self.grid.half_width, n_probe, endpoint=False)
        vals = np.concatenate([self.values, self.at(probe)])
        out = []
        lo, hi = float(vals.min()), float(vals.max())
        if lo < 1.0 / self.bound:
            out.append(f"C1: min a(x) = {lo:.6g} below 1/M = {1.0 / self.bound:.6g}")
        if hi > self.bound:
            out.append(f"C1: max a(x) = {hi:.6g} above M = {self.bound:.6g}")
        return out


def constant_scale(grid: Grid1D, value: float = 1.0, bound: float = 2.0) -> ScaleField:
    return ScaleField(grid, "constant", {"value": value}, bound)


# -- fractional Laplacian -----------------------------------------------------

def frac_symbol(grid: Grid1D, p: StableParams) -> np.ndarray:
    return grid.k ** p.alpha


def frac_laplacian_spectral(f: TestFunction, p: StableParams) -> TestFunction:
    grid = f.grid
    return TestFunction(grid, grid.fourier_multiply(f.values, frac_symbol(grid, p)))


@dataclass(frozen=True)
class FractionalLaplacianSpec:
    """Quadrature settings for the singular-integral form.

    ``inner_cutoff`` and ``outer_cutoff`` default to ``h/2`` and ``4L`` of
    the grid the operator is applied on.
    """

    params: StableParams
    c_alpha: float | None = None
    inner_cutoff: float | None = None
    outer_cutoff: float | None = None
    nodes_per_panel: int = 10

    def __post_init__(self):
        if self.c_alpha is None:
            object.__setattr__(self, "c_alpha", c_alpha(self.params.alpha))
        if not self.c_alpha > 0:
            raise DomainError("c_alpha must be positive")
        eps, big = self.inner_cutoff, self.outer_cutoff
        if eps is not None and big is not None and not 0 < eps < big:
            raise DomainError(f"need 0 < inner_cutoff < outer_cutoff, got {eps}, {big}")

    def cutoffs(self, grid: Grid1D) -> tuple[float, float]:
        eps = 0.5 * grid.h if self.inner_cutoff is None else self.inner_cutoff
        big = 4.0 * grid.half_width if self.outer_cutoff is None else self.outer_cutoff
        if not 0 < eps < big:
            raise DomainError(f"need 0 < inner_cutoff < outer_cutoff, got {eps}, {big}")
        return eps, big


def _quadrature_nodes(eps: float, big: float, max_panel: float, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on geometrically graded then uniform panels of [eps, big]."""
    edges = [eps]
    while edges[-1] < big:
        step = min(edges[-1], max_panel)  # doubling near the singularity
        edges.append(min(edges[-1] + step, big))
    edges = np.array(edges)
    t, w = np.polynomial.legendre.leggauss(q)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def frac_laplacian_quadrature(f: TestFunction, spec: FractionalLaplacianSpec, chunk: int = 512) -> TestFunction:
    """Singular-integral evaluation of ``|Delta|^{alpha/2} f``.

    The compensated integrand is symmetrized in ``y -> -y``; the odd
    compensator ``f'(x) y / (1 + y^2)`` then cancels identically and only the
    second difference ``f(x+y) + f(x-y) - 2 f(x)`` remains.  ``f(x +- y)`` is
    evaluated off-grid with the periodic trigonometric interpolant.  The
    region ``|y| < eps`` is added from the Taylor expansion (orders 2 and 4)
    and ``|y| > R`` from the period average of ``f``.
    """
    grid = f.grid
    a = spec.params.alpha
    eps, big = spec.cutoffs(grid)
    nodes, weights = _quadrature_nodes(eps, big, 2.0 * grid.h, spec.nodes_per_panel)
    wy = weights * nodes ** (-1.0 - a)

    fhat = np.fft.rfft(f.values)
    total = np.zeros(grid.n_points)
    for start in range(0, nodes.size, chunk):
        y = nodes[start:start + chunk]
        # f(x+y) + f(x-y) has Fourier coefficients 2 cos(k y) fhat
        pair = np.fft.irfft(2.0 * np.cos(np.outer(y, grid.k)) * fhat[None, :], n=grid.n_points, axis=-1)
        total += wy[start:start + chunk] @ pair
    total -= 2.0 * f.values * wy.sum()

    f2 = grid.derivative(f.values, 2)
    f4 = grid.derivative(f.values, 4)
    inner = f2 * eps ** (2.0 - a) / (2.0 - a) + f4 * eps ** (4.0 - a) / (12.0 * (4.0 - a))
    outer = 2.0 * (f.values.mean() - f.values) * big ** (-a) / a
    integral = total + inner + outer
    # the symbol-positive operator is minus the compensated integral
    return TestFunction(grid, -spec.c_alpha * integral)


# -- generator and its adjoint -----------------------------------------------

def apply_generator(f: TestFunction, drift_field: TestFunction, a: ScaleField, p: StableParams) -> TestFunction:
    """``(b . grad) f - a |Delta|^{alpha/2} f`` on the grid."""
    grid = check_same_grid(f.grid, drift_field.grid, a.grid)
    df = grid.derivative(f.values)
    lap = grid.fourier_multiply(f.values, frac_symbol(grid, p))
    return TestFunction(grid, drift_field.values * df - a.values * lap)


def apply_adjoint_generator(g: GridDensity, drift_field: TestFunction, a: ScaleField, p: StableParams) -> GridDensity:
    """Formal adjoint acting on densities: ``-d/dx (b g) - |Delta|^{alpha/2}(a g)``."""
    grid = check_same_grid(g.grid, drift_field.grid, a.grid)
    out = -grid.derivative(drift_field.values * g.values)
    out -= grid.fourier_multiply(a.values * g.values, frac_symbol(grid, p))
    return GridDensity(grid, out, signed=True)
