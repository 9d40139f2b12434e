"""Stochastic characteristics for a constant common-noise coefficient.

The translation group ``T(s) v(x) = v(x + sigma s)`` generated by
``sigma d/dx`` turns the Stratonovich equation for ``mu_t`` into a
deterministic equation for ``zeta_t = T*(-W_t) mu_t`` whose coefficients are
the original ones evaluated at noise-shifted arguments.  On densities the
dual action is a translation: ``mu_t(x) = zeta_t(x - sigma W_t)``.

All translations are Fourier phase multiplications, so the group law,
mass and pairings are preserved to roundoff.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .drift import BoundDrift, DriftSpec
from .fields import FirstOrderField, SecondOrderField
from .grid import POSITIVITY_TOLERANCE, GridDensity, TestFunction, check_same_grid
from .operators import ScaleField
from .stable import NoisePath


@dataclass(frozen=True)
class CommonNoiseSpec:
    sigma_com: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.sigma_com):
            raise ValueError("sigma_com must be finite")

    def offset(self, w: float) -> float:
        return self.sigma_com * w


def _density_like(g: GridDensity, values: np.ndarray) -> GridDensity:
    top = float(np.abs(values).max()) if values.size else 0.0
    signed = g.signed or bool(values.min() < -POSITIVITY_TOLERANCE * top)
    return GridDensity(g.grid, values, signed)


def shift_density(g: GridDensity, s: float) -> GridDensity:
    """The density ``x -> g(x - s)``."""
    return _density_like(g, g.grid.translate(g.values, s))


def transform_to_zeta(mu: GridDensity, w: float, noise: CommonNoiseSpec) -> GridDensity:
    return shift_density(mu, -noise.offset(w))


def transform_from_zeta(zeta: GridDensity, w: float, noise: CommonNoiseSpec) -> GridDensity:
    return shift_density(zeta, noise.offset(w))


def dress_coefficients(spec: DriftSpec, a: ScaleField, w: float, zeta: GridDensity,
                       noise: CommonNoiseSpec) -> tuple[TestFunction, ScaleField]:
    """``b~(x) = b(x + sigma w, mu)`` with ``mu = zeta(. - sigma w)``, and ``a~(x) = a(x + sigma w)``."""
    grid = check_same_grid(zeta.grid, a.grid)
    s = noise.offset(w)
    mu = grid.translate(zeta.values, s)
    b = BoundDrift.on_grid(spec, grid, s).value(mu)
    return TestFunction(grid, b), a.shifted(s)


def transfer_first_vd(xi_zeta: FirstOrderField, path: NoisePath, t_index: int,
                      noise: CommonNoiseSpec) -> FirstOrderField:
    """Move the slices retained at path time ``t_index`` to mu-coordinates.

    Only the target variable is shifted; source labels stay put.
    """
    if not 0 <= t_index <= path.n_steps:
        raise IndexError(f"t_index {t_index} outside path of {path.n_steps} steps")
    t = path.times[t_index]
    i = xi_zeta.time_index(t)
    s = noise.offset(path.values[t_index])
    values = xi_zeta.grid.translate(xi_zeta.values[i:i + 1], s)
    return FirstOrderField(xi_zeta.grid, xi_zeta.sources, [t], values, coords="mu")


def transfer_second_vd(eta_zeta: SecondOrderField, path: NoisePath, t_index: int,
                       noise: CommonNoiseSpec) -> SecondOrderField:
    if not 0 <= t_index <= path.n_steps:
        raise IndexError(f"t_index {t_index} outside path of {path.n_steps} steps")
    t = path.times[t_index]
    i = eta_zeta.time_index(t)
    s = noise.offset(path.values[t_index])
    values = eta_zeta.grid.translate(eta_zeta.values[i:i + 1], s)
    return SecondOrderField(eta_zeta.grid, eta_zeta.pairs, [t], values, coords="mu")


def field_to_mu(field, path: NoisePath, noise: CommonNoiseSpec):
    """Transfer every retained time of a zeta-coordinate field to mu-coordinates."""
    shifts = np.array([noise.offset(path.value_at(t)) for t in field.times])
    grid = field.grid
    symbol = np.exp(-1j * np.outer(shifts, grid.k))[:, None, :]
    values = np.fft.irfft(np.fft.rfft(field.values, axis=-1) * symbol, n=grid.n_points, axis=-1)
    cls = type(field)
    labels = field.sources if isinstance(field, FirstOrderField) else field.pairs
    return cls(grid, labels, field.times, values, coords="mu")
