"""Detection of T-periodic solutions by long-time simulation.

The system is integrated through a transient, then sampled M times per
period. The period-map residual compares each period's samples with the
previous period's; two consecutive residuals under tolerance count as
convergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .model import ModelSpec
from .dde import model_stepper

CONSTANT_AMPLITUDE = 1e-8
BOUNDS_TOL = 1e-6
SIMPLEX_TOL = 1e-8
MUTUAL_TOL = 1e-6
COUNTEREXAMPLE_TOL = 1e-5


@dataclass
class PeriodicSearchConfig:
    transient_periods: int = 200
    samples_per_period: int = 256
    residual_tolerance: float = 1e-6
    max_extra_periods: int = 800
    multistart_count: int = 16
    seed: int = 0
    steps_per_sample: int = 1

    def step(self, period: float) -> float:
        return period / (self.samples_per_period * self.steps_per_sample)


@dataclass
class PeriodicOrbitReport:
    converged: bool
    residual: float
    residual_trace: list[float]
    orbit_times: np.ndarray
    orbit_samples: np.ndarray
    minima: np.ndarray
    maxima: np.ndarray
    is_constant: bool
    simplex_deviation: float
    simplex_verdict: bool
    interior: bool
    periods_run: int
    eta: float | None = None
    nu: float | None = None
    bounds_verdict: tuple[bool, ...] | None = None
    bounds_excess: float | None = None
    clip_count: int = 0

    @property
    def amplitude(self) -> float:
        return float(np.max(self.maxima - self.minima))

    @property
    def mean_state(self) -> np.ndarray:
        return self.orbit_samples.mean(axis=0)

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "residual": self.residual,
            "residual_trace": list(self.residual_trace),
            "periods_run": self.periods_run,
            "minima": self.minima.tolist(),
            "maxima": self.maxima.tolist(),
            "amplitude": self.amplitude,
            "is_constant": self.is_constant,
            "simplex_deviation": self.simplex_deviation,
            "simplex_verdict": self.simplex_verdict,
            "interior": self.interior,
            "eta": self.eta,
            "nu": self.nu,
            "bounds_verdict": None if self.bounds_verdict is None else list(self.bounds_verdict),
            "bounds_excess": self.bounds_excess,
            "clip_count": self.clip_count,
        }


def _fidelity_range(spec: ModelSpec):
    q, p = spec.mutation[0][0], spec.mutation[1][0]
    qs, ps = q.grid(), p.grid()
    return float(min(qs.min(), ps.min())), float(max(qs.max(), ps.max()))


def find_periodic(spec: ModelSpec, initial_history, search: PeriodicSearchConfig | None = None,
                  t0: float = 0.0, initial_state=None) -> PeriodicOrbitReport:
    """Integrate until the period map settles, then report the last period."""
    search = search or PeriodicSearchConfig()
    T = spec.period
    M = search.samples_per_period
    k = search.steps_per_sample
    stepper = model_stepper(spec, initial_history, t0, search.step(T), initial_state)

    for _ in range(search.transient_periods * M * k):
        stepper.step()

    def one_period():
        times = np.empty(M)
        out = np.empty((M, spec.species_count))
        for m in range(M):
            times[m] = stepper.t
            out[m] = stepper.x
            for _ in range(k):
                stepper.step()
        return times, out

    times, prev = one_period()
    trace: list[float] = []
    streak = 0
    converged = False
    for _ in range(search.max_extra_periods):
        times, cur = one_period()
        res = float(np.max(np.abs(cur - prev)))
        trace.append(res)
        prev = cur
        streak = streak + 1 if res <= search.residual_tolerance else 0
        if streak >= 2:
            converged = True
            break

    mins, maxs = prev.min(axis=0), prev.max(axis=0)
    dev = float(np.max(np.abs(prev.sum(axis=1) - 1.0)))
    report = PeriodicOrbitReport(
        converged=converged,
        residual=trace[-1] if trace else math.inf,
        residual_trace=trace,
        orbit_times=times,
        orbit_samples=prev,
        minima=mins,
        maxima=maxs,
        is_constant=bool(np.max(maxs - mins) < CONSTANT_AMPLITUDE),
        simplex_deviation=dev,
        simplex_verdict=dev <= SIMPLEX_TOL,
        interior=bool(np.all(mins > 0.0) and np.all(maxs < 1.0)),
        periods_run=search.transient_periods + 1 + len(trace),
        clip_count=stepper.clip_count,
    )
    if spec.species_count == 2:
        eta, nu = _fidelity_range(spec)
        x0_ok = eta - BOUNDS_TOL <= mins[0] and maxs[0] <= nu + BOUNDS_TOL
        x1_ok = 1.0 - nu - BOUNDS_TOL <= mins[1] and maxs[1] <= 1.0 - eta + BOUNDS_TOL
        report.eta, report.nu = eta, nu
        report.bounds_verdict = (bool(x0_ok), bool(x1_ok))
        report.bounds_excess = float(max(eta - mins[0], maxs[0] - nu,
                                         1.0 - nu - mins[1], maxs[1] - (1.0 - eta)))
    return report


def orbit_history(report: PeriodicOrbitReport, period: float):
    """Periodic cubic-spline history through a reported orbit."""
    times = np.append(report.orbit_times, report.orbit_times[0] + period)
    values = np.vstack([report.orbit_samples, report.orbit_samples[:1]])
    spline = CubicSpline(times, values, axis=0, bc_type="periodic")
    start = times[0]
    return lambda t: spline(start + np.mod(t - start, period))


@dataclass
class SweepEntry:
    delay: float
    report: PeriodicOrbitReport | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return (self.report is not None and self.report.converged
                and self.report.bounds_verdict is not None and all(self.report.bounds_verdict))


@dataclass
class SweepReport:
    entries: list[SweepEntry]

    @property
    def all_converged(self) -> bool:
        return all(e.report is not None and e.report.converged for e in self.entries)

    @property
    def all_bounds_hold(self) -> bool:
        return all(e.ok for e in self.entries)

    def as_dict(self) -> dict:
        return {
            "all_converged": self.all_converged,
            "all_bounds_hold": self.all_bounds_hold,
            "entries": [
                {"delay": e.delay, "error": e.error,
                 "report": None if e.report is None else e.report.as_dict()}
                for e in self.entries
            ],
        }


def delay_independence_sweep(spec: ModelSpec, delays, search: PeriodicSearchConfig | None = None,
                             initial_history=None, t0: float = 0.0) -> SweepReport:
    """Run :func:`find_periodic` with every delay replaced by each constant in ``delays``."""
    if initial_history is None:
        initial_history = np.full(spec.species_count, 1.0 / spec.species_count)
    entries = []
    for tau in delays:
        try:
            rep = find_periodic(spec.with_constant_delays(tau), initial_history, search, t0)
            entries.append(SweepEntry(float(tau), rep))
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            entries.append(SweepEntry(float(tau), None, f"{type(exc).__name__}: {exc}"))
    return SweepReport(entries)


class CounterexampleError(RuntimeError):
    """Two converged orbits of a constant-fidelity model disagree."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass
class UniquenessReport:
    eta: float
    starts: list[np.ndarray]
    reports: list[PeriodicOrbitReport]
    common_constant: np.ndarray | None
    max_mutual_distance: float
    seed: int
    expected: tuple[float, float] = field(init=False)
    stated: tuple[float, float] = field(init=False)

    def __post_init__(self):
        # simplex-consistent limit versus the (eta, eta) form stated with the theorem
        self.expected = (self.eta, 1.0 - self.eta)
        self.stated = (self.eta, self.eta)

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.reports)

    @property
    def all_constant(self) -> bool:
        # a start counts as settled on a constant once its amplitude is within the agreement tolerance
        return all(r.amplitude <= MUTUAL_TOL for r in self.reports)

    @property
    def distance_to_expected(self) -> float:
        if self.common_constant is None:
            return math.inf
        return float(np.max(np.abs(self.common_constant - np.array(self.expected))))

    @property
    def unique(self) -> bool:
        return self.all_converged and self.all_constant and self.max_mutual_distance <= MUTUAL_TOL

    def as_dict(self) -> dict:
        return {
            "eta": self.eta,
            "seed": self.seed,
            "all_converged": self.all_converged,
            "all_constant": self.all_constant,
            "max_mutual_distance": self.max_mutual_distance,
            "common_constant": None if self.common_constant is None else self.common_constant.tolist(),
            "expected_simplex_limit": list(self.expected),
            "stated_limit": list(self.stated),
            "stated_limit_on_simplex": abs(sum(self.stated) - 1.0) <= SIMPLEX_TOL,
            "distance_to_expected": self.distance_to_expected,
            "starts": [s.tolist() for s in self.starts],
            "limits": [r.mean_state.tolist() for r in self.reports],
            "amplitudes": [r.amplitude for r in self.reports],
        }


def uniqueness_probe(spec: ModelSpec, search: PeriodicSearchConfig | None = None,
                     t0: float = 0.0) -> UniquenessReport:
    """Multistart check that a constant-fidelity model has one constant periodic orbit.

    Each start uses a constant history drawn uniformly from [0.05, 0.95]
    per component, rescaled onto the simplex at ``t0``.
    """
    search = search or PeriodicSearchConfig()
    if spec.species_count != 2:
        raise ValueError("uniqueness probe is defined for two species")
    q, p = spec.mutation[0][0], spec.mutation[1][0]
    qs, ps = q.grid(), p.grid()
    eta = float(qs[0])
    if max(np.ptp(qs), np.ptp(ps), abs(ps[0] - qs[0])) > 1e-12:
        raise ValueError("uniqueness probe needs q(t) = p(t) = eta constant")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"need 0 < eta < 1, got {eta}")

    rng = np.random.default_rng(search.seed)
    starts, reports = [], []
    for _ in range(search.multistart_count):
        u = rng.uniform(0.05, 0.95, size=spec.species_count)
        starts.append(u)
        reports.append(find_periodic(spec, u, search, t0, initial_state=u / u.sum()))

    limits = np.array([r.mean_state for r in reports if r.converged])
    if len(limits):
        spread = float(max(np.max(np.abs(a - b)) for a in limits for b in limits))
        common = limits.mean(axis=0)
    else:
        spread, common = math.inf, None
    report = UniquenessReport(eta, starts, reports, common, spread, search.seed)
    if len(limits) and spread > COUNTEREXAMPLE_TOL:
        raise CounterexampleError(
            f"converged orbits differ by {spread:.3e} (> {COUNTEREXAMPLE_TOL}) for eta={eta}", report)
    return report
