import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mkvspde.characteristics import CommonNoiseSpec
from mkvspde.drift import DriftSpec, InteractionKernel
from mkvspde.grid import Grid1D, gaussian_density
from mkvspde.operators import ScaleField, constant_scale
from mkvspde.stable import StableParams

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture
def grid():
    return Grid1D(10.0, 256)


@pytest.fixture
def small_grid():
    return Grid1D(10.0, 64)


@pytest.fixture
def stable():
    return StableParams(1.5)


@pytest.fixture
def unit_scale(grid):
    return constant_scale(grid)


@pytest.fixture
def wavy_scale(grid):
    return ScaleField(grid, "cosine", {"mean": 1.0, "amplitude": 0.2, "frequency": np.pi / 10})


@pytest.fixture
def gaussian_spec():
    return DriftSpec(terms=[(0.5, InteractionKernel("gaussian", {"width": 1.0}))])


@pytest.fixture
def quadratic_spec():
    return DriftSpec(terms=[(0.5, InteractionKernel("quadratic_gaussian", {"width": 1.0}))])


@pytest.fixture
def sine_spec():
    return DriftSpec("sine", {"amplitude": 0.5, "frequency": np.pi / 5})


@pytest.fixture
def bump(grid):
    return gaussian_density(grid, 0.0, 1.0)


@pytest.fixture
def no_noise():
    return CommonNoiseSpec(0.0)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
