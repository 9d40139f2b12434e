"""Scenario execution, artifact persistence and reproducibility manifests.

Stages run in a fixed order (spde, compare, particles, sensitivity); a
failing stage is recorded in the manifest and later stages still run.
Every random draw flows from ``master_seed`` through named streams:

* ``("common", 0)`` seeds the common-noise path;
* ``("compare", 0)`` seeds the refinement study's path;
* ``("particles", b)`` is the idiosyncratic master seed of batch ``b``,
  split per particle by :func:`mkvspde.particles.simulate_particles`.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import time
import traceback
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .grid import l1_distance
from .mkv_pde import retained_indices
from .particles import chaos_distance, export_chaos_series, simulate_particles
from .scenarios import Scenario, common_noise_seed
from .sensitivity import eta_in_mu, fd_first_order, solve_eta, solve_xi, xi_in_mu
from .spde import compare_methods
from .stable import stable_evolve, stream_seed

OUTPUT_ROOT_ENV = "MKVSPDE_OUTPUT_ROOT"
MANIFEST_NAME = "manifest.json"


def resolve_output_dir(cfg: ExperimentConfig, root=None) -> Path:
    """``root`` (or the environment override, or ``./runs``) joined with the configured directory."""
    target = Path(cfg.output_dir or cfg.name)
    if target.is_absolute():
        return target
    base = root if root is not None else os.environ.get(OUTPUT_ROOT_ENV, "runs")
    return Path(base) / target


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    return path


def _write_columns(path: Path, x: np.ndarray, columns: dict[str, np.ndarray]) -> Path:
    names = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", *names])
        for j in range(x.size):
            w.writerow([repr(float(x[j]))] + [repr(float(columns[n][j])) for n in names])
    return path


@dataclass
class RunResult:
    directory: Path
    manifest: dict
    checks: dict = field(default_factory=dict)

    @property
    def failed_stages(self) -> list[str]:
        return [s for s, info in self.manifest["stages"].items() if info["status"] != "ok"]

    @property
    def checks_passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())


def _spde_stage(cfg, sc: Scenario, out: Path, seeds: dict, checks: dict, summary: dict):
    seed = common_noise_seed(cfg.master_seed)
    seeds["common_noise"] = {"stream": ["common", 0], "seed": seed}
    path = sc.noise_path(seed)
    _write_columns(out / "noise_path.csv", path.times, {"W": path.values})
    traj = sc.solve_spde(path)
    traj.export(out / "spde", prefix="mu")
    mass0 = sc.initial.mass
    summary["spde"] = {"mass_drift": traj.mass_drift(), "max_undershoot": traj.max_undershoot(),
                       "max_tv_ratio": float(traj.tv_norms.max() / mass0),
                       "max_picard_iterations": int(traj.picard_iterations.max())}
    if cfg.checks is not None:
        ck = cfg.checks
        checks["mass_drift"] = {"value": traj.mass_drift(), "tolerance": ck.mass_drift,
                                "passed": traj.mass_drift() < ck.mass_drift}
        ratio = float(traj.tv_norms.max() / mass0)
        checks["tv_bound"] = {"value": ratio, "tolerance": 1.0 + ck.tv_slack, "passed": ratio <= 1.0 + ck.tv_slack}
        if ck.closed_form is not None:
            if not (sc.drift.measure_independent and sc.drift.base == "zero" and sc.scale.is_constant
                    and sc.noise.sigma_com == 0.0):
                raise ValueError("the closed-form check needs b = 0, constant a and sigma_com = 0")
            ref = stable_evolve(sc.initial, sc.horizon, sc.scale.mean, sc.stable)
            err = l1_distance(traj.final, ref)
            checks["closed_form"] = {"value": err, "tolerance": ck.closed_form, "passed": err < ck.closed_form}
    return path, traj


def _compare_stage(cfg, sc: Scenario, out: Path, seeds: dict, summary: dict):
    seed = stream_seed(cfg.master_seed, "compare", 0)
    seeds["compare"] = {"stream": ["compare", 0], "seed": seed}
    rep = compare_methods(sc.initial, seed, sc.drift, sc.scale, sc.noise, sc.solver, cfg.compare.refinements,
                          sc.stable, sc.horizon, milstein=cfg.compare.milstein)
    _write_json(out / "compare.json", rep.as_dict())
    summary["compare"] = {"convergence_factor": rep.convergence_factor}


def _particle_stage(cfg, sc: Scenario, out: Path, seeds: dict, summary: dict, path, traj):
    pc = cfg.particles
    pdir = out / "particles"
    pdir.mkdir(exist_ok=True)
    seeds["particles"] = []
    finals = []
    for b in range(pc.batches):
        seed = stream_seed(cfg.master_seed, "particles", b)
        seeds["particles"].append({"stream": ["particles", b], "seed": seed,
                                   "per_particle_stream": ["idiosyncratic", "0..N-1"]})
        states = simulate_particles(pc.n, sc.initial, path, sc.drift, sc.scale, sc.noise, sc.stable, seed,
                                    dt=pc.dt, bandwidth=pc.bandwidth, snapshots=sc.snapshots)
        states[-1].to_csv(pdir / f"batch{b:02d}_final.csv")
        dists = [chaos_distance(s, traj.density(i)) for i, s in enumerate(states)]
        export_chaos_series([s.t for s in states], dists, pdir / f"batch{b:02d}_w1.json")
        finals.append(dists[-1])
    summary["particles"] = {"final_w1": finals, "n": pc.n}


def _sensitivity_stage(cfg, sc: Scenario, out: Path, summary: dict, path):
    sdir = out / "sensitivity"
    sdir.mkdir(exist_ok=True)
    zeta = sc.solve_zeta(path, snapshots="all")
    args = (path, sc.drift, sc.scale, sc.noise, sc.solver, sc.stable)
    sources = sorted(set(sc.sources) | {v for pair in sc.pairs for v in pair})
    xi_all = solve_xi(sources, zeta, *args, snapshots="all")
    xi = xi_in_mu(xi_all, path, sc.noise)
    labels = {f"t={float(xi.times[i])!r}": int(i) for i in retained_indices(sc.n_steps, sc.snapshots)}
    for s, x in enumerate(sources):
        _write_columns(sdir / f"xi_{s:02d}.csv", sc.grid.x, {k: xi.values[i, s] for k, i in labels.items()})
    info = {"sources": sources, "slice_mass_error": float(np.abs(xi.slice_masses() - 1.0).max())}
    if sc.pairs:
        eta = eta_in_mu(solve_eta(sc.pairs, xi_all, zeta, *args, snapshots="all"), path, sc.noise)
        for q in range(len(sc.pairs)):
            _write_columns(sdir / f"eta_{q:02d}.csv", sc.grid.x, {k: eta.values[i, q] for k, i in labels.items()})
        info["pairs"] = [list(p) for p in sc.pairs]
        info["eta_mass_error"] = float(np.abs(eta.slice_masses()).max())
    fd_steps = cfg.sensitivity.fd_steps
    if fd_steps:
        base = sc.solve_spde(path, snapshots=2).values
        errors = {}
        for h in fd_steps:
            errs = []
            for s, x in enumerate(sources):
                fd = fd_first_order(sc.initial, x, float(h), *args, snapshots=2, base=base)[-1]
                errs.append(float(np.abs(fd - xi.values[-1, s]).sum() / np.abs(fd).sum()))
            errors[repr(float(h))] = errs
        info["fd_relative_l1"] = errors
    _write_json(sdir / "summary.json", info)
    summary["sensitivity"] = info


def run_scenario(cfg: ExperimentConfig, root=None) -> RunResult:
    """Execute the configured pipeline and write artifacts plus ``manifest.json``."""
    out = resolve_output_dir(cfg, root)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", cfg.as_dict())
    seeds: dict = {"master_seed": cfg.master_seed}
    checks: dict = {}
    summary: dict = {}
    stages: dict = {}
    state: dict = {}

    def run(name, fn, *args):
        t0 = time.perf_counter()
        try:
            result = fn(*args)
            stages[name] = {"status": "ok"}
            return result
        except Exception as exc:  # recorded, not raised: partial artifacts are kept
            stages[name] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}",
                            "traceback": traceback.format_exc(limit=5)}
            return None
        finally:
            stages[name]["wall_time_s"] = time.perf_counter() - t0

    sc = run("setup", Scenario.from_config, cfg)
    if sc is not None:
        res = run("spde", _spde_stage, cfg, sc, out, seeds, checks, summary)
        if res is not None:
            state["path"], state["traj"] = res
        if cfg.compare is not None:
            run("compare", _compare_stage, cfg, sc, out, seeds, summary)
        if cfg.particles is not None and state:
            run("particles", _particle_stage, cfg, sc, out, seeds, summary, state["path"], state["traj"])
        if cfg.sensitivity is not None and state:
            run("sensitivity", _sensitivity_stage, cfg, sc, out, summary, state["path"])

    artifacts = {str(p.relative_to(out)): _sha256(p) for p in sorted(out.rglob("*"))
                 if p.is_file() and p.name != MANIFEST_NAME}
    manifest = {
        "name": cfg.name,
        "config_hash": cfg.config_hash(),
        "seeds": seeds,
        "versions": _versions(),
        "stages": stages,
        "summary": summary,
        "checks": checks,
        "artifacts": artifacts,
    }
    _write_json(out / MANIFEST_NAME, manifest)
    return RunResult(out, manifest, checks)


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "package": pkg}


# -- artifact comparison ----------------------------------------------------------


def _numeric_rows(path: Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)


def compare_artifacts(dir_a, dir_b) -> dict:
    """Max absolute differences between same-named CSV artifacts of two runs."""
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    files_a = {str(p.relative_to(dir_a)) for p in dir_a.rglob("*.csv")}
    files_b = {str(p.relative_to(dir_b)) for p in dir_b.rglob("*.csv")}
    diffs = {}
    for name in sorted(files_a & files_b):
        a, b = _numeric_rows(dir_a / name), _numeric_rows(dir_b / name)
        if a.shape != b.shape:
            diffs[name] = {"shape_a": list(a.shape), "shape_b": list(b.shape), "max_abs_diff": None}
        else:
            diffs[name] = {"max_abs_diff": float(np.abs(a - b).max()) if a.size else 0.0,
                           "bytes_equal": (dir_a / name).read_bytes() == (dir_b / name).read_bytes()}
    identical = (files_a == files_b
                 and all(d.get("bytes_equal", False) for d in diffs.values()))
    return {"only_in_a": sorted(files_a - files_b), "only_in_b": sorted(files_b - files_a),
            "files": diffs, "identical": identical}
