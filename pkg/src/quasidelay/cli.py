"""Command-line front end.

Exit status: 0 success, 1 a verification case failed, 2 usage or
configuration error. Every run writes ``<output>.manifest.json`` next to its
primary output, and JSON reports embed the same block under ``manifest``.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .averaging import AveragedData, DegenerateRootError, check_condition_C, localization_box, solve_S
from .config import ConfigError, parse_config, spec_digest
from .dde import IntegrationConfig, integrate, write_csv
from .periodic import PeriodicSearchConfig, find_periodic
from .verify import Claim, VerificationCase, builtin_cases, run_suite


@dataclass
class RunManifest:
    subcommand: str
    config_path: str | None
    spec_digest: str | None
    tool_version: str = __version__
    wall_clock_seconds: float = 0.0
    outputs: list[str] = field(default_factory=list)


class UsageError(Exception):
    pass


def _state(text: str | None, dim: int) -> np.ndarray:
    if text is None:
        return np.full(dim, 1.0 / dim)
    try:
        vals = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise UsageError(f"cannot parse state {text!r}") from None
    if len(vals) != dim:
        raise UsageError(f"state needs {dim} components, got {len(vals)}")
    return vals


def _write_json(path, doc):
    text = json.dumps(doc, indent=2, sort_keys=True, default=_default)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(type(obj))


def _finish(manifest: RunManifest, started: float, primary: str | None):
    manifest.wall_clock_seconds = time.perf_counter() - started
    if primary is not None:
        Path(primary + ".manifest.json").write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")


def cmd_simulate(args, manifest):
    spec = parse_config(args.config)
    h = args.h if args.h is not None else spec.period / 256
    x0 = _state(args.initial, spec.species_count)
    pre = _state(args.history, spec.species_count) if args.history else x0
    traj = integrate(spec, pre, args.t0, IntegrationConfig(h, args.t_end, record_stride=args.record_stride),
                     initial_state=x0)
    traj.to_csv(args.out)
    manifest.outputs.append(args.out)
    print(f"{len(traj)} samples, h={traj.step:.6g}, max |sum-1|={traj.max_deviation():.3e}, "
          f"clipped={traj.clip_count} -> {args.out}", file=sys.stderr)
    return 0, args.out


def cmd_solve(args, manifest):
    spec = parse_config(args.config)
    data = AveragedData.from_spec(spec)
    roots = solve_S(data, spec.growth)
    doc = {"averages": asdict(data)}
    try:
        degree = check_condition_C(roots, data)
        doc.update(degree.as_dict())
    except DegenerateRootError as exc:
        doc.update({"roots": [r.as_dict() for r in roots], "condition_S": bool(roots),
                    "condition_C": False, "error": str(exc)})
    try:
        box = localization_box(data)
        doc["box"] = {"x": [box.x_lo, box.x_hi], "y": [box.y_lo, box.y_hi], "note": box.note}
    except ValueError as exc:
        doc["box"] = {"error": str(exc)}
    if args.out:
        manifest.outputs.append(args.out)
    doc["manifest"] = asdict(manifest)
    _write_json(args.out, doc)
    return 0, args.out


def cmd_find_periodic(args, manifest):
    spec = parse_config(args.config)
    search = PeriodicSearchConfig(transient_periods=args.transient, samples_per_period=args.samples_per_period,
                                  residual_tolerance=args.tol, max_extra_periods=args.max_extra)
    x0 = _state(args.initial, spec.species_count)
    rep = find_periodic(spec, x0, search)
    if args.orbit_csv:
        write_csv(args.orbit_csv, rep.orbit_times, rep.orbit_samples)
        manifest.outputs.append(args.orbit_csv)
    if args.out:
        manifest.outputs.append(args.out)
    doc = rep.as_dict()
    doc["manifest"] = asdict(manifest)
    _write_json(args.out, doc)
    return 0, args.out or args.orbit_csv


def cmd_verify(args, manifest):
    if args.config:
        if not args.claim:
            raise UsageError("--config needs --claim")
        spec = parse_config(args.config)
        cases = [VerificationCase(Path(args.config).stem, spec, Claim(args.claim),
                                  {"transient_periods": args.transient})]
    else:
        cases = builtin_cases(transient_periods=args.transient, seed=args.seed)
        if args.suite != "all":
            cases = [c for c in cases if c.name == args.suite]
            if not cases:
                raise UsageError(f"unknown case {args.suite!r}")
    report = run_suite(cases)
    print(report.table(), file=sys.stderr)
    if args.junit:
        Path(args.junit).write_text(report.junit() + "\n")
        manifest.outputs.append(args.junit)
    if args.out:
        manifest.outputs.append(args.out)
    doc = report.as_dict()
    doc["manifest"] = asdict(manifest)
    _write_json(args.out, doc)
    return (0 if report.passed else 1), args.out or args.junit


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quasidelay", description="Delayed quasispecies toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate a model and write a trajectory CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--t-end", type=float, required=True)
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--h", type=float, default=None, help="step (default period/256)")
    s.add_argument("--record-stride", type=int, default=1)
    s.add_argument("--initial", help="state at t0, comma separated (default uniform)")
    s.add_argument("--history", help="constant state before t0 (default: the initial state)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("solve-algebraic", help="roots of the averaged two-class system")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("find-periodic", help="detect a T-periodic orbit by simulation")
    s.add_argument("--config", required=True)
    s.add_argument("--transient", type=int, default=200)
    s.add_argument("--samples-per-period", type=int, default=256)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--max-extra", type=int, default=800)
    s.add_argument("--initial")
    s.add_argument("--out")
    s.add_argument("--orbit-csv")
    s.set_defaults(func=cmd_find_periodic)

    s = sub.add_parser("verify", help="run the verification suite")
    s.add_argument("--suite", default="all")
    s.add_argument("--config", help="verify a single model file (needs --claim)")
    s.add_argument("--claim", choices=[c.value for c in Claim])
    s.add_argument("--transient", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--junit")
    s.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    started = time.perf_counter()
    config_path = getattr(args, "config", None)
    manifest = RunManifest(args.command, config_path, None)
    try:
        if config_path:
            manifest.spec_digest = spec_digest(parse_config(config_path))
        status, primary = args.func(args, manifest)
    except (ConfigError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _finish(manifest, started, primary)
    return status


if __name__ == "__main__":
    sys.exit(main())
