"""Command-line entry point: ``mkvspde run|validate|compare``.

Exit codes: 0 success, 1 requested checks failed or artifacts differ,
2 invalid configuration or a failed stage.
"""
from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, load_config
from .runner import compare_artifacts, run_scenario
from .scenarios import BUILTIN_SCENARIOS, builtin_config


def _load(args):
    if args.builtin:
        return builtin_config(args.builtin)
    if not args.config:
        raise ConfigError(["give a config path or --builtin NAME"])
    return load_config(args.config)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mkvspde", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for verb in ("run", "validate"):
        p = sub.add_parser(verb)
        p.add_argument("config", nargs="?", help="TOML configuration file")
        p.add_argument("--builtin", choices=sorted(BUILTIN_SCENARIOS), help="use a built-in scenario")
        if verb == "run":
            p.add_argument("--output-root", help="directory under which the run directory is created")
            p.add_argument("--seed", type=int, help="override master_seed")
    p = sub.add_parser("compare")
    p.add_argument("dir_a")
    p.add_argument("dir_b")
    args = parser.parse_args(argv)

    if args.command == "compare":
        report = compare_artifacts(args.dir_a, args.dir_b)
        print(json.dumps(report, indent=1, sort_keys=True))
        return 0 if report["identical"] else 1

    try:
        cfg = _load(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print(f"{cfg.name}: valid (hash {cfg.config_hash()})")
        return 0

    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, master_seed=args.seed)
    result = run_scenario(cfg, root=args.output_root)
    print(f"artifacts: {result.directory}")
    for stage, info in result.manifest["stages"].items():
        print(f"  stage {stage}: {info['status']} ({info['wall_time_s']:.2f} s)")
        if info["status"] != "ok":
            print(f"    {info['error']}")
    for name, check in result.checks.items():
        print(f"  check {name}: {'PASS' if check['passed'] else 'FAIL'} "
              f"(value {check['value']:.6g}, tolerance {check['tolerance']:.6g})")
    if result.failed_stages:
        return 2
    return 0 if result.checks_passed else 1


if __name__ == "__main__":
    sys.exit(main())
