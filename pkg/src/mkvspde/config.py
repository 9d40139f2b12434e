"""Experiment configuration documents.

A configuration is a TOML document with one table per stage.  Every key is
checked against the schema below; unknown keys are errors.  Example::

    name = "interacting"
    master_seed = 7

    [grid]
    half_width = 10.0
    n_points = 256

    [model]
    alpha = 1.5
    sigma_com = 0.5

    [[drift.kernels]]
    name = "gaussian"
    weight = 0.5
    params = { width = 1.0 }

    [time]
    horizon = 0.5
    dt = 1e-3
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Raised with every violation found in a document."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class GridSection:
    half_width: float = 10.0
    n_points: int = 256


@dataclass(frozen=True)
class ModelSection:
    alpha: float = 1.5
    sigma_com: float = 0.0
    mass_bound: float = 1.0


@dataclass(frozen=True)
class ScaleSection:
    profile: str = "constant"
    params: dict = field(default_factory=lambda: {"value": 1.0})
    bound: float = 2.0


@dataclass(frozen=True)
class KernelEntry:
    name: str
    weight: float = 1.0
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DriftSection:
    base: str = "zero"
    base_params: dict = field(default_factory=dict)
    outer: str = "affine"
    kernels: tuple = ()


@dataclass(frozen=True)
class InitialSection:
    kind: str = "gaussian"
    center: float = 0.0
    std: float = 1.0
    mass: float = 1.0


@dataclass(frozen=True)
class TimeSection:
    horizon: float = 1.0
    dt: float = 1e-3
    snapshots: int = 11


@dataclass(frozen=True)
class SolverSection:
    picard_tol: float = 1e-10
    picard_max_iter: int = 25
    imex: bool = True


@dataclass(frozen=True)
class CompareSection:
    refinements: int = 3
    milstein: bool = True


@dataclass(frozen=True)
class ParticleSection:
    n: int = 2000
    batches: int = 1
    bandwidth: float | None = None
    dt: float | None = None


@dataclass(frozen=True)
class SensitivitySection:
    sources: tuple = ()
    pairs: tuple = ()
    fd_steps: tuple = ()


@dataclass(frozen=True)
class ChecksSection:
    mass_drift: float = 1e-8
    tv_slack: float = 1e-6
    closed_form: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    master_seed: int = 0
    output_dir: str | None = None
    grid: GridSection = GridSection()
    model: ModelSection = ModelSection()
    scale: ScaleSection = ScaleSection()
    drift: DriftSection = DriftSection()
    initial: InitialSection = InitialSection()
    time: TimeSection = TimeSection()
    solver: SolverSection = SolverSection()
    compare: CompareSection | None = None
    particles: ParticleSection | None = None
    sensitivity: SensitivitySection | None = None
    checks: ChecksSection | None = None

    def as_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form; insensitive to key order."""
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_SECTIONS = {
    "grid": GridSection, "model": ModelSection, "scale": ScaleSection, "drift": DriftSection,
    "initial": InitialSection, "time": TimeSection, "solver": SolverSection,
    "compare": CompareSection, "particles": ParticleSection, "sensitivity": SensitivitySection,
    "checks": ChecksSection,
}
_SCALARS = {"name": str, "master_seed": int, "output_dir": str}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _coerce(value, annotation: str, where: str, errors: list[str]):
    kind = annotation.split("|")[0].strip()
    if value is None:
        if "None" not in annotation:
            errors.append(f"{where}: must not be empty")
        return value
    try:
        if kind == "float":
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind == "int":
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind == "dict":
            if not isinstance(value, Mapping):
                raise TypeError
            return {str(k): float(v) for k, v in value.items()}
        if kind == "tuple":
            if not isinstance(value, (list, tuple)):
                raise TypeError
            return tuple(value)
    except (TypeError, ValueError):
        errors.append(f"{where}: expected {kind}, got {value!r}")
        return None
    return value


def _build(cls, table: Mapping, where: str, errors: list[str]):
    if not isinstance(table, Mapping):
        errors.append(f"{where}: expected a table")
        return cls()
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key in table:
        if key not in fields:
            errors.append(f"{where}.{key}: unknown key (allowed: {', '.join(sorted(fields))})")
    kwargs = {}
    for key, f in fields.items():
        if key in table:
            kwargs[key] = _coerce(table[key], str(f.type), f"{where}.{key}", errors)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        errors.append(f"{where}: {exc}")
        return None


def from_mapping(doc: Mapping[str, Any]) -> ExperimentConfig:
    """Validate a parsed document; raises :class:`ConfigError` listing every problem."""
    errors: list[str] = []
    kwargs: dict[str, Any] = {}
    for key, value in doc.items():
        if key in _SCALARS:
            kwargs[key] = _coerce(value, _SCALARS[key].__name__, key, errors)
        elif key in _SECTIONS:
            table = dict(value) if isinstance(value, Mapping) else value
            if key == "drift" and isinstance(table, dict):
                entries = table.pop("kernels", [])
                if not isinstance(entries, list):
                    errors.append("drift.kernels: expected an array of tables")
                    entries = []
                section = _build(DriftSection, table, "drift", errors)
                kernels = tuple(_build(KernelEntry, e, f"drift.kernels[{i}]", errors)
                                for i, e in enumerate(entries))
                kwargs[key] = dataclasses.replace(section, kernels=kernels) if section else None
            else:
                kwargs[key] = _build(_SECTIONS[key], table, key, errors)
        else:
            allowed = sorted(_SCALARS) + sorted(_SECTIONS)
            errors.append(f"{key}: unknown key (allowed: {', '.join(allowed)})")
    if errors:
        raise ConfigError(errors)
    cfg = ExperimentConfig(**kwargs)
    _semantic_checks(cfg)
    return cfg


def _semantic_checks(cfg: ExperimentConfig) -> None:
    """Registry lookups, ranges and the mass/scale bounds."""
    from .drift import BASE_DRIFTS, KERNELS, InteractionKernel
    from .grid import Grid1D
    from .operators import SCALE_PROFILES, ScaleField

    errors: list[str] = []
    if not 1.0 < cfg.model.alpha < 2.0:
        errors.append(f"model.alpha: must lie in the open interval (1, 2), got {cfg.model.alpha}")
    try:
        grid = Grid1D(cfg.grid.half_width, cfg.grid.n_points)
    except ValueError as exc:
        errors.append(f"grid: {exc}")
        grid = None
    if cfg.drift.base not in BASE_DRIFTS:
        errors.append(f"drift.base: unknown base drift {cfg.drift.base!r}; known: {sorted(BASE_DRIFTS)}")
    if cfg.drift.outer != "affine":
        errors.append(f"drift.outer: only 'affine' is implemented, got {cfg.drift.outer!r}")
    for i, k in enumerate(cfg.drift.kernels):
        if k.name not in KERNELS:
            errors.append(f"drift.kernels[{i}].name: unknown kernel {k.name!r}; known kernels: {sorted(KERNELS)}")
            continue
        try:
            InteractionKernel(k.name, k.params)
        except TypeError as exc:
            errors.append(f"drift.kernels[{i}].params: {exc}")
    if cfg.scale.profile not in SCALE_PROFILES:
        errors.append(f"scale.profile: unknown profile {cfg.scale.profile!r}; known: {sorted(SCALE_PROFILES)}")
    elif grid is not None:
        try:
            violations = ScaleField(grid, cfg.scale.profile, cfg.scale.params, cfg.scale.bound).c1_violations()
            errors.extend(f"scale: {v}" for v in violations)
        except (TypeError, ValueError) as exc:
            errors.append(f"scale: {exc}")
    if cfg.initial.kind not in ("gaussian", "dirac"):
        errors.append(f"initial.kind: expected 'gaussian' or 'dirac', got {cfg.initial.kind!r}")
    if not cfg.initial.mass > 0:
        errors.append("initial.mass: must be positive")
    if cfg.initial.mass > cfg.model.mass_bound:
        errors.append(f"initial.mass: {cfg.initial.mass} exceeds model.mass_bound {cfg.model.mass_bound}")
    if grid is not None and not grid.contains(cfg.initial.center):
        errors.append(f"initial.center: {cfg.initial.center} outside the domain")
    if not cfg.time.dt > 0 or not cfg.time.horizon > 0:
        errors.append("time: horizon and dt must be positive")
    elif abs(round(cfg.time.horizon / cfg.time.dt) * cfg.time.dt - cfg.time.horizon) > 1e-9 * cfg.time.horizon:
        errors.append(f"time.dt: {cfg.time.dt} does not divide the horizon {cfg.time.horizon}")
    if cfg.time.snapshots < 2:
        errors.append("time.snapshots: need at least 2")
    if cfg.compare is not None and cfg.compare.refinements < 2:
        errors.append("compare.refinements: need at least 2")
    if cfg.particles is not None:
        if cfg.particles.n < 1 or cfg.particles.batches < 1:
            errors.append("particles: n and batches must be >= 1")
        if cfg.particles.bandwidth is not None and not cfg.particles.bandwidth > 0:
            errors.append("particles.bandwidth: must be positive")
    if cfg.sensitivity is not None:
        s = cfg.sensitivity
        for x in s.sources:
            if grid is not None and not grid.contains(float(x)):
                errors.append(f"sensitivity.sources: {x} outside the domain")
        for pair in s.pairs:
            if len(pair) != 2:
                errors.append(f"sensitivity.pairs: {pair!r} is not a pair")
        if any(not float(h) > 0 for h in s.fd_steps):
            errors.append("sensitivity.fd_steps: must be positive")
    if errors:
        raise ConfigError(errors)


def load_config(source) -> ExperimentConfig:
    """Parse and validate a TOML document given as a path or as text."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and source.endswith(".toml")):
        text = Path(source).read_text()
    else:
        text = str(source)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"parse error: {exc}"]) from exc
    return from_mapping(doc)
