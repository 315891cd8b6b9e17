"""Executable checks of the model's invariance, existence and closed-form claims.

Each :class:`VerificationCase` maps a claim onto the integrator, the
averaged-system solver or the periodic finder, and records a verdict with a
signed margin (tolerance minus observed deviation, minimised over the
sub-checks of the claim).
"""

from __future__ import annotations

import enum
import json
import math
import traceback
from dataclasses import dataclass, field
from xml.etree import ElementTree as ET

import numpy as np

from . import scenarios
from .averaging import (AveragedData, check_condition_C, corollary_linear_root,
                        corollary_logistic_root, solve_S)
from .dde import IntegrationConfig, integrate
from .model import GrowthKind, ModelSpec, validate_model
from .periodic import (BOUNDS_TOL, MUTUAL_TOL, SIMPLEX_TOL, CounterexampleError,
                       PeriodicSearchConfig, delay_independence_sweep, find_periodic,
                       uniqueness_probe)


class Claim(str, enum.Enum):
    CP_INVARIANCE = "CP_INVARIANCE"
    PERIODIC_ON_SIMPLEX = "PERIODIC_ON_SIMPLEX"
    TEOP_BOUNDS = "TEOP_BOUNDS"
    TEOS_UNIQUENESS = "TEOS_UNIQUENESS"
    COROLLARY1_FORM = "COROLLARY1_FORM"
    COROLLARY2_FORM = "COROLLARY2_FORM"
    DELAY_INDEPENDENCE = "DELAY_INDEPENDENCE"


@dataclass
class VerificationCase:
    name: str
    spec: ModelSpec
    claim: Claim
    parameters: dict = field(default_factory=dict)
    verdict: str | None = None
    margin: float | None = None


@dataclass
class CaseResult:
    name: str
    claim: Claim
    passed: bool
    margin: float
    checks: list[dict]
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "claim": self.claim.value,
            "verdict": "pass" if self.passed else "fail",
            "margin": _num(self.margin),
            "checks": [{k: _num(v) for k, v in c.items()} for c in self.checks],
            "diagnostics": _jsonable(self.diagnostics),
        }


def _num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return _num(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _check(name, observed, tolerance):
    """A sub-check passes when observed <= tolerance; margin = tolerance - observed."""
    observed = float(observed)
    ok = math.isfinite(observed) and observed <= tolerance
    return {"check": name, "observed": observed, "tolerance": tolerance,
            "margin": tolerance - observed if math.isfinite(observed) else -math.inf, "pass": ok}


def _flag(name, ok):
    """Boolean sub-check; only a failing flag constrains the margin."""
    return {"check": name, "observed": 0.0 if ok else 1.0, "tolerance": 0.0,
            "margin": math.inf if ok else -1.0, "pass": bool(ok)}


def _search(params) -> PeriodicSearchConfig:
    keys = PeriodicSearchConfig.__dataclass_fields__
    return PeriodicSearchConfig(**{k: v for k, v in params.items() if k in keys})


def _cp_invariance(case):
    p = case.parameters
    spec = case.spec
    periods = p.get("periods", 100)
    h = spec.period / p.get("steps_per_period", 256)
    start = np.asarray(p.get("initial_state", [0.6, 0.4]), dtype=float)
    pre = np.asarray(p.get("prehistory", start), dtype=float)
    traj = integrate(spec, pre, 0.0, IntegrationConfig(h, periods * spec.period), initial_state=start)
    dev = traj.max_deviation()
    lo = float(traj.sample_states.min())
    hi = float(traj.sample_states.max())
    checks = [
        _check("max |sum x_i - 1|", dev, p.get("tolerance", 1e-8)),
        _check("box excursion", max(0.0, -lo, hi - 1.0), 1e-8),
    ]
    return checks, {"max_deviation": dev, "min_component": lo, "max_component": hi,
                    "samples": len(traj), "clip_count": traj.clip_count}


def _corollary(case, closed_form):
    p = case.parameters
    spec = case.spec
    data = AveragedData.from_spec(spec)
    roots = solve_S(data, spec.growth)
    x_cf, y_cf = closed_form(data)
    checks = [_flag("unique root in open square", len(roots) == 1)]
    diag = {"closed_form": [x_cf, y_cf], "roots": [r.as_dict() for r in roots]}
    if len(roots) == 1:
        r = roots[0]
        checks.append(_check("|root - closed form|", max(abs(r.x - x_cf), abs(r.y - y_cf)),
                             p.get("algebraic_tolerance", 1e-10)))
        degree = check_condition_C(roots, data)
        checks.append(_flag("sign sum nonzero", degree.condition_C_holds))
        diag["sign_sum"] = degree.sign_sum
    if p.get("simulate", True):
        search = _search(p)
        rep = find_periodic(spec, np.asarray(p.get("initial_state", [0.5, 0.5])), search)
        dist = float(np.max(np.abs(rep.orbit_samples - np.array([x_cf, y_cf]))))
        checks.append(_flag("simulation converged", rep.converged))
        checks.append(_check("|simulated limit - closed form|", dist, p.get("simulation_tolerance", 1e-6)))
        diag["simulation"] = rep.as_dict()
    return checks, diag


def _teop_bounds(case):
    p = case.parameters
    rep = find_periodic(case.spec, np.asarray(p.get("initial_state", [0.5, 0.5])), _search(p))
    data = AveragedData.from_spec(case.spec)
    checks = [
        _flag("converged", rep.converged),
        _check("period-map residual", rep.residual, p.get("residual_tolerance", 1e-6)),
        _check("bounds excess", max(0.0, rep.bounds_excess), BOUNDS_TOL),
        _check("simplex deviation", rep.simplex_deviation, SIMPLEX_TOL),
        _flag("0 < eta < nu < 1", 0.0 < data.eta < data.nu < 1.0),
    ]
    return checks, {"orbit": rep.as_dict()}


def _periodic_on_simplex(case):
    p = case.parameters
    rep = find_periodic(case.spec, np.asarray(p.get("initial_state", [0.7, 0.5])), _search(p),
                        initial_state=p.get("start_on_simplex"))
    checks = [
        _flag("converged", rep.converged),
        _flag("orbit strictly inside ]0,1[", rep.interior),
        _check("simplex deviation", rep.simplex_deviation, SIMPLEX_TOL),
    ]
    return checks, {"orbit": rep.as_dict()}


def _teos_uniqueness(case):
    p = case.parameters
    try:
        rep = uniqueness_probe(case.spec, _search(p))
    except CounterexampleError as exc:
        return [_check("mutual distance", exc.report.max_mutual_distance, MUTUAL_TOL)], exc.report.as_dict()
    worst_amp = max(r.amplitude for r in rep.reports)
    checks = [
        _flag("all starts converged", rep.all_converged),
        _check("orbit amplitude", worst_amp, MUTUAL_TOL),
        _check("mutual distance", rep.max_mutual_distance, MUTUAL_TOL),
        _check("|limit - (eta, 1 - eta)|", rep.distance_to_expected, MUTUAL_TOL),
    ]
    return checks, rep.as_dict()


def _delay_independence(case):
    p = case.parameters
    T = case.spec.period
    delays = [f * T for f in p.get("delay_fractions", [0.0, 0.3, 2.7])]
    sweep = delay_independence_sweep(case.spec, delays, _search(p), np.asarray(p.get("initial_state", [0.5, 0.5])))
    checks = []
    for e in sweep.entries:
        label = f"tau={e.delay:g}"
        checks.append(_flag(f"{label} converged", e.report is not None and e.report.converged))
        if e.report is not None:
            checks.append(_check(f"{label} bounds excess", max(0.0, e.report.bounds_excess), BOUNDS_TOL))
            checks.append(_check(f"{label} simplex deviation", e.report.simplex_deviation, SIMPLEX_TOL))
    return checks, sweep.as_dict()


_HANDLERS = {
    Claim.CP_INVARIANCE: _cp_invariance,
    Claim.PERIODIC_ON_SIMPLEX: _periodic_on_simplex,
    Claim.TEOP_BOUNDS: _teop_bounds,
    Claim.TEOS_UNIQUENESS: _teos_uniqueness,
    Claim.COROLLARY1_FORM: lambda c: _corollary(c, corollary_linear_root),
    Claim.COROLLARY2_FORM: lambda c: _corollary(c, corollary_logistic_root),
    Claim.DELAY_INDEPENDENCE: _delay_independence,
}

_GROWTH_FOR_CLAIM = {Claim.COROLLARY1_FORM: GrowthKind.LINEAR, Claim.COROLLARY2_FORM: GrowthKind.LOGISTIC}


def run_case(case: VerificationCase) -> CaseResult:
    """Run one case; any exception becomes a failed verdict."""
    claim = Claim(case.claim)
    try:
        violations = validate_model(case.spec).violations
        if violations:
            raise ValueError("invalid model: " + "; ".join(violations))
        need = _GROWTH_FOR_CLAIM.get(claim)
        if need is not None and case.spec.growth.kind is not need:
            raise ValueError(f"{claim.value} applies to {need.value} growth, got {case.spec.growth.kind.value}")
        checks, diag = _HANDLERS[claim](case)
    except Exception as exc:  # noqa: BLE001 - suite must not abort
        checks = [_flag("ran without error", False)]
        diag = {"error": f"{type(exc).__name__}: {exc}", "traceback": traceback.format_exc(limit=3)}
    passed = all(c["pass"] for c in checks)
    margin = min(c["margin"] for c in checks)
    case.verdict = "pass" if passed else "fail"
    case.margin = margin
    return CaseResult(case.name, claim, passed, margin, checks, diag)


@dataclass
class SuiteReport:
    results: list[CaseResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "cases": [r.as_dict() for r in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        rows = [("case", "claim", "verdict", "margin")]
        for r in self.results:
            rows.append((r.name, r.claim.value, "pass" if r.passed else "FAIL", f"{r.margin:.3e}"))
        widths = [max(len(row[i]) for row in rows) for i in range(4)]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)

    def junit(self) -> str:
        suite = ET.Element("testsuite", name="quasidelay-verify", tests=str(len(self.results)),
                           failures=str(sum(not r.passed for r in self.results)))
        for r in self.results:
            tc = ET.SubElement(suite, "testcase", classname=r.claim.value, name=r.name)
            if not r.passed:
                failed = [c["check"] for c in r.checks if not c["pass"]]
                fail = ET.SubElement(tc, "failure", message="; ".join(failed))
                fail.text = json.dumps(_jsonable(r.diagnostics.get("error", failed)))
        return ET.tostring(suite, encoding="unicode")


def run_suite(cases: list[VerificationCase]) -> SuiteReport:
    results = [run_case(c) for c in cases]
    results.sort(key=lambda r: r.name)
    return SuiteReport(results)


def builtin_cases(transient_periods: int = 200, multistart_count: int = 16, seed: int = 0) -> list[VerificationCase]:
    """The reference scenario set, one case per (scenario, claim) pairing."""
    search = {"transient_periods": transient_periods, "samples_per_period": 256,
              "residual_tolerance": 1e-6, "multistart_count": multistart_count, "seed": seed}
    return [
        VerificationCase("E1", scenarios.e1(), Claim.CP_INVARIANCE,
                         {"initial_state": [0.6, 0.4], "prehistory": [0.7, 0.5], "periods": 100}),
        VerificationCase("E1_FORM", scenarios.e1(), Claim.COROLLARY1_FORM, dict(search)),
        VerificationCase("E2", scenarios.e2(), Claim.COROLLARY1_FORM, dict(search)),
        VerificationCase("L1", scenarios.l1(), Claim.COROLLARY2_FORM, dict(search)),
        VerificationCase("P1", scenarios.p1(), Claim.TEOP_BOUNDS, dict(search)),
        VerificationCase("P1_SIMPLEX", scenarios.p1(), Claim.PERIODIC_ON_SIMPLEX,
                         dict(search, initial_state=[0.7, 0.5], start_on_simplex=[0.6, 0.4])),
        VerificationCase("S1", scenarios.s1(), Claim.TEOS_UNIQUENESS, dict(search)),
        VerificationCase("S2", scenarios.s2(), Claim.TEOS_UNIQUENESS, dict(search)),
        VerificationCase("D1", scenarios.p1(), Claim.DELAY_INDEPENDENCE,
                         dict(search, delay_fractions=[0.0, 0.3, 2.7])),
    ]
