"""Measure-dependent drift built from integral functionals of the measure.

A drift is ``b(x, mu) = beta(x) + sum_m theta_m I_m(x, mu)`` with

* ``I(x, mu) = int B(x, y) mu(dy)`` for order-1 kernels, and
* ``I(x, mu) = int int phi(x, y1) phi(x, y2) mu(dy1) mu(dy2)`` for order-2
  kernels (symmetric in ``y1, y2`` by construction).

All registry kernels depend on the periodically wrapped difference
``x - y`` so the model is translation-equivariant on the periodic box.
Because the outer combination is affine and the orders are at most two,
variational derivatives are closed-form and vanish from order three on.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .grid import Grid1D, GridDensity, TestFunction, dirac_approx, gaussian_density

# -- registries ----------------------------------------------------------------


def _gaussian(d, width=1.0):
    return np.exp(-0.5 * (d / width) ** 2)


def _cosine(d, frequency=1.0):
    return np.cos(frequency * d)


def _constant(d, value=1.0):
    return np.full(np.shape(d), float(value))


def _gaussian_attraction(d, width=1.0):
    # pulls x towards y: B = (y - x) exp(-(x-y)^2 / 2w^2)
    return -d * np.exp(-0.5 * (d / width) ** 2)


# name -> (order, profile of the wrapped difference d = x - y)
KERNELS = {
    "gaussian": (1, _gaussian),
    "cosine": (1, _cosine),
    "constant": (1, _constant),
    "gaussian_attraction": (1, _gaussian_attraction),
    "quadratic_gaussian": (2, _gaussian),
    "quadratic_cosine": (2, _cosine),
}

BASE_DRIFTS = {
    "zero": lambda x: np.zeros(np.shape(x)),
    "constant": lambda x, value=0.0: np.full(np.shape(x), float(value)),
    "sine": lambda x, amplitude=1.0, frequency=1.0, phase=0.0: amplitude * np.sin(frequency * x + phase),
}


@dataclass(frozen=True)
class InteractionKernel:
    name: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in KERNELS:
            raise KeyError(f"unknown kernel {self.name!r}; known kernels: {sorted(KERNELS)}")
        object.__setattr__(self, "params", dict(self.params))
        self.profile(np.zeros(1))  # reject bad parameter names early

    @property
    def order(self) -> int:
        return KERNELS[self.name][0]

    def profile(self, d) -> np.ndarray:
        return KERNELS[self.name][1](np.asarray(d, dtype=float), **self.params)

    def factor_matrix(self, points: np.ndarray, grid: Grid1D) -> np.ndarray:
        """``B(x_i, y_j)`` (order 1) or ``phi(x_i, y_j)`` (order 2)."""
        d = grid.wrap_difference(np.subtract.outer(grid.wrap(points), grid.x))
        return self.profile(d)

    def __call__(self, x, *ys):
        """Closed-form kernel value, for oracles and inspection."""
        if len(ys) != self.order:
            raise TypeError(f"{self.name} takes {self.order} measure argument(s)")
        out = 1.0
        for y in ys:
            out = out * self.profile(np.asarray(x) - np.asarray(y))
        return out


@dataclass(frozen=True)
class DriftSpec:
    """``beta(x) + sum theta_m I_m(x, mu)``; only the affine outer function ships."""

    base: str = "zero"
    base_params: Mapping[str, float] = field(default_factory=dict)
    terms: Sequence[tuple[float, InteractionKernel]] = ()
    outer: str = "affine"

    def __post_init__(self):
        if self.base not in BASE_DRIFTS:
            raise KeyError(f"unknown base drift {self.base!r}; known: {sorted(BASE_DRIFTS)}")
        if self.outer != "affine":
            raise NotImplementedError(f"outer combination {self.outer!r} is not implemented")
        object.__setattr__(self, "base_params", dict(self.base_params))
        object.__setattr__(self, "terms", tuple((float(w), k) for w, k in self.terms))
        self.base_drift(np.zeros(1))

    def base_drift(self, x) -> np.ndarray:
        return BASE_DRIFTS[self.base](np.asarray(x, dtype=float), **self.base_params)

    @property
    def active_terms(self):
        return tuple((w, k) for w, k in self.terms if w != 0.0)

    @property
    def measure_independent(self) -> bool:
        return not self.active_terms

    @property
    def max_order(self) -> int:
        return max((k.order for _, k in self.active_terms), default=0)


class BoundDrift:
    """A drift specification evaluated at fixed points against grid measures.

    Measures enter as arrays of cell values; leading axes are batch axes.
    When the points are the grid nodes shifted by a constant, the integral
    functionals are periodic convolutions and are evaluated by FFT.
    """

    def __init__(self, spec: DriftSpec, points, grid: Grid1D, shift: float | None = None):
        self.spec = spec
        self.grid = grid
        self.shift = shift
        self.points = grid.x + shift if shift is not None else np.asarray(points, dtype=float)
        self.base = spec.base_drift(self.points)
        self._terms = []
        for w, k in spec.active_terms:
            if shift is None:
                op = grid.h * k.factor_matrix(self.points, grid)
            else:
                # B(x_i + s - y_j) depends on (i - j) mod n only
                op = grid.h * np.fft.rfft(k.profile(grid.wrap(grid.h * np.arange(grid.n_points) + shift)))
            self._terms.append((w, k.order, op))

    @classmethod
    def on_grid(cls, spec: DriftSpec, grid: Grid1D, shift: float = 0.0) -> "BoundDrift":
        return cls(spec, None, grid, shift=float(shift))

    def _apply(self, op, mu):
        if self.shift is None:
            return mu @ op.T
        return np.fft.irfft(np.fft.rfft(mu, axis=-1) * op, n=self.grid.n_points, axis=-1)

    def value(self, mu: np.ndarray) -> np.ndarray:
        out = np.broadcast_to(self.base, np.shape(mu)[:-1] + self.base.shape).copy()
        for w, order, op in self._terms:
            integ = self._apply(op, mu)
            out += w * (integ if order == 1 else integ * integ)
        return out

    def linear(self, mu: np.ndarray, dmu: np.ndarray) -> np.ndarray:
        """Directional derivative of ``b(x, mu)`` along ``dmu``."""
        out = np.zeros(np.shape(dmu)[:-1] + self.points.shape)
        for w, order, op in self._terms:
            d_integ = self._apply(op, dmu)
            if order == 1:
                out += w * d_integ
            else:
                out += 2.0 * w * self._apply(op, mu) * d_integ
        return out

    def quadratic(self, dmu1: np.ndarray, dmu2: np.ndarray) -> np.ndarray:
        """Second directional derivative along ``(dmu1, dmu2)``; independent of ``mu``."""
        shape = np.broadcast_shapes(np.shape(dmu1)[:-1], np.shape(dmu2)[:-1]) + self.points.shape
        out = np.zeros(shape)
        for w, order, op in self._terms:
            if order == 2:
                out += 2.0 * w * self._apply(op, dmu1) * self._apply(op, dmu2)
        return out


def eval_drift(spec: DriftSpec, mu: GridDensity) -> TestFunction:
    grid = mu.grid
    return TestFunction(grid, BoundDrift.on_grid(spec, grid).value(mu.values))


def eval_drift_at(spec: DriftSpec, points, mu: GridDensity) -> np.ndarray:
    return BoundDrift(spec, points, mu.grid).value(mu.values)


def drift_first_vd(spec: DriftSpec, mu: GridDensity, z: float) -> TestFunction:
    """``delta b(x, mu) / delta mu(z)`` on the grid, ``z`` a grid point."""
    grid = mu.grid
    direction = dirac_approx(grid, z).values
    return TestFunction(grid, BoundDrift.on_grid(spec, grid).linear(mu.values, direction))


def drift_second_vd(spec: DriftSpec, mu: GridDensity, z: float, u: float) -> TestFunction:
    grid = mu.grid
    dz = dirac_approx(grid, z).values
    du = dirac_approx(grid, u).values
    return TestFunction(grid, BoundDrift.on_grid(spec, grid).quadratic(dz, du))


# -- regularity conditions ------------------------------------------------------


@dataclass
class ConditionReport:
    sup_drift: float
    lipschitz_x: float
    sup_first_vd: float
    sup_second_vd: float
    n_probes: int
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "sup_drift": self.sup_drift,
            "lipschitz_x": self.lipschitz_x,
            "sup_first_vd": self.sup_first_vd,
            "sup_second_vd": self.sup_second_vd,
            "n_probes": self.n_probes,
            "violations": list(self.violations),
            "passed": self.passed,
        }


def measure_design_set(grid: Grid1D, lam: float, n_probes: int, rng: np.random.Generator):
    """Mixtures of up to three Dirac surrogates plus smooth bumps, mass in (0, lam]."""
    L = grid.half_width
    for _ in range(n_probes):
        values = np.zeros(grid.n_points)
        for _ in range(rng.integers(0, 4)):
            node = grid.x[rng.integers(grid.n_points)]
            values += rng.uniform() * dirac_approx(grid, node).values
        for _ in range(rng.integers(0, 3)):
            values += rng.uniform() * gaussian_density(
                grid, rng.uniform(-L / 2, L / 2), rng.uniform(0.2, 2.0)
            ).values
        mass = grid.h * values.sum()
        if mass == 0.0:
            values = dirac_approx(grid, grid.x[rng.integers(grid.n_points)]).values
            mass = 1.0
        yield values * (1.0 - rng.uniform()) * lam / mass


def validate_conditions(spec: DriftSpec, a, lam: float, n_probes: int = 1000, seed: int = 0,
                        threshold: float = 1e6) -> ConditionReport:
    """Sampled-supremum check of the boundedness and regularity conditions.

    Suprema over the measure class ``{mass <= lam}`` are estimated on a
    design set of ``n_probes`` measures; spatial suprema use the grid and a
    twice finer probe set for the Lipschitz quotient.
    """
    grid = a.grid
    rng = np.random.default_rng(seed)
    fine = np.linspace(-grid.half_width, grid.half_width, 2 * grid.n_points, endpoint=False)
    bound_fine = BoundDrift(spec, fine, grid)
    step = fine[1] - fine[0]

    # first variational derivative in direction of each unit grid atom
    atoms = np.eye(grid.n_points) / grid.h
    bound_grid = BoundDrift.on_grid(spec, grid)

    sup_b = lip = sup_v1 = 0.0
    for mu in measure_design_set(grid, lam, n_probes, rng):
        b = bound_fine.value(mu)
        sup_b = max(sup_b, float(np.abs(b).max()))
        wrapped = np.diff(np.append(b, b[0]))
        lip = max(lip, float(np.abs(wrapped).max()) / step)
        if not spec.measure_independent:
            sup_v1 = max(sup_v1, float(np.abs(bound_grid.linear(mu, atoms)).max()))
    sup_v2 = 0.0
    if spec.max_order == 2:
        # sup over (x, z, u) of |2 theta phi(x,z) phi(x,u)| = 2|theta| max_x (max_z |phi|)^2
        sup_v2 = sum(2.0 * abs(w) * float((np.abs(k.factor_matrix(grid.x, grid)).max(axis=1) ** 2).max())
                     for w, k in spec.active_terms if k.order == 2)

    violations = list(a.c1_violations())
    for name, value in [("C2: sup|b|", sup_b), ("C2: Lipschitz in x", lip),
                        ("C3: sup first variational derivative", sup_v1),
                        ("C3: sup second variational derivative", sup_v2)]:
        if not np.isfinite(value) or value > threshold:
            violations.append(f"{name} = {value:.6g} exceeds threshold {threshold:g}")
    return ConditionReport(sup_b, lip, sup_v1, sup_v2, n_probes, violations)
