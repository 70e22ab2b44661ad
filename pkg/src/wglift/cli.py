"""Command-line entry point for convergence studies and diagnostics."""

from __future__ import annotations

import argparse
import json
import sys

from .study import FAMILY_DIM, SOLUTIONS, StudyConfig, run_study

__all__ = ["parse_config", "main", "main_entry"]


def _parse_levels(text: str) -> tuple:
    text = text.strip()
    for sep in ("..", "-", ":"):
        if sep in text:
            a, b = text.split(sep, 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError(f"malformed level range {text!r}")
            return tuple(range(lo, hi + 1))
    return (int(text),)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wglift",
        description="Weak Galerkin Poisson solver with P_{k+2} lifting: "
                    "convergence studies on polytopal meshes.")
    p.add_argument("--config", default="", help="JSON config file; flags override")
    p.add_argument("--family", choices=("quad", "mixed", "wedge"), default=None)
    p.add_argument("--k", type=int, default=None, help="interior degree (>= 1)")
    p.add_argument("--levels", default=None, help="inclusive range, e.g. 3..5")
    p.add_argument("--solution", choices=tuple(SOLUTIONS), default=None)
    p.add_argument("--csv-out", default=None, help="write per-level CSV here")
    p.add_argument("--dump-mesh", default=None, help="export meshes to PATH.L<level>.txt")
    p.add_argument("--dump-lambda-dims", action="store_true", default=None)
    p.add_argument("--dump-certificates", action="store_true", default=None)
    p.add_argument("--tol", type=float, default=None, help="solver residual tolerance")
    return p


def parse_config(argv) -> StudyConfig:
    """Validated StudyConfig from CLI arguments (plus optional JSON file)."""
    ns = _build_parser().parse_args(argv)
    values = {"family": "quad", "k": 1, "levels": (3, 4, 5), "solution": "",
              "csv_out": "", "dump_mesh": "", "dump_lambda_dims": False,
              "dump_certificates": False, "solver_tol": 1e-11}
    if ns.config:
        with open(ns.config) as fh:
            data = json.load(fh)
        for key, val in data.items():
            if key == "levels" and isinstance(val, str):
                val = _parse_levels(val)
            if key == "levels" and isinstance(val, list):
                val = tuple(val)
            if key not in values:
                raise ValueError(f"unknown config field {key!r}")
            values[key] = val
    overrides = {
        "family": ns.family, "k": ns.k,
        "levels": _parse_levels(ns.levels) if ns.levels is not None else None,
        "solution": ns.solution, "csv_out": ns.csv_out,
        "dump_mesh": ns.dump_mesh, "dump_lambda_dims": ns.dump_lambda_dims,
        "dump_certificates": ns.dump_certificates, "solver_tol": ns.tol,
    }
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    config = StudyConfig(**values)
    config.validate()
    return config


def main(config: StudyConfig) -> int:
    """Run the study, print the table, write CSV if requested."""
    try:
        report = run_study(config)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"family={config.family} k={config.k} "
          f"solution={config.resolved_solution()}")
    print(report.table_str())
    if config.dump_lambda_dims:
        for lv, dims in zip(report.levels, report.lambda_dims):
            print(f"lambda dims, level {lv.level}: "
                  f"min={min(dims)} max={max(dims)}")
    if config.dump_certificates:
        for lv, certs in zip(report.levels, report.certificates):
            print(f"certificates, level {lv.level}: "
                  f"min sigma ratio = {min(certs):.6e}")
    if config.csv_out:
        with open(config.csv_out, "w") as fh:
            fh.write(report.csv_str())
    return 0


def main_entry() -> int:
    try:
        config = parse_config(sys.argv[1:])
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return main(config)


if __name__ == "__main__":
    sys.exit(main_entry())
