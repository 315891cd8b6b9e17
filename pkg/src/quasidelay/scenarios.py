"""Reference two-class scenarios (period T = 1).

E1  exponential growth, constant f0=2, f1=1, q=0.9, p=0.1
E2  exponential growth, f0 = f1 = 1, q=0.9, p=0.1
L1  logistic growth, coefficients of E1
P1  logistic growth, q = 0.8 + 0.1 sin, p = 0.15 + 0.05 cos, f0 = 2 + cos, f1 = 1
S1  exponential growth, q = p = 0.5, f0 = 2 + sin, f1 = 1
S2  logistic growth, q = p = 0.3, f0 = 2 + sin, f1 = 1

All use delays tau0 = 0.5, tau1 = 1.3 unless told otherwise.
"""

from __future__ import annotations

from .model import GrowthFunction, ModelSpec, PeriodicSignal

PERIOD = 1.0
TAU0 = 0.5
TAU1 = 1.3


def signal(mean, cos=(), sin=(), period=PERIOD) -> PeriodicSignal:
    return PeriodicSignal(period, mean, tuple(cos), tuple(sin))


def two_class(growth: GrowthFunction, f0: PeriodicSignal, f1: PeriodicSignal,
              q: PeriodicSignal, p: PeriodicSignal, tau0=TAU0, tau1=TAU1,
              period: float = PERIOD) -> ModelSpec:
    """Two-class model with Q rows (q, 1-q) and (p, 1-p)."""
    def complement(s: PeriodicSignal) -> PeriodicSignal:
        return PeriodicSignal(s.period, 1.0 - s.mean_term,
                              tuple(-c for c in s.cosine_coeffs), tuple(-c for c in s.sine_coeffs))

    def as_signal(v):
        return v if isinstance(v, PeriodicSignal) else PeriodicSignal.constant(v, period)

    q, p, f0, f1 = map(as_signal, (q, p, f0, f1))
    return ModelSpec(
        species_count=2,
        period=period,
        growth=growth,
        rates=(f0, f1),
        delays=(as_signal(tau0), as_signal(tau1)),
        mutation=((q, complement(q)), (p, complement(p))),
    )


def e1() -> ModelSpec:
    return two_class(GrowthFunction.linear(), signal(2.0), signal(1.0), signal(0.9), signal(0.1))


def e2() -> ModelSpec:
    return two_class(GrowthFunction.linear(), signal(1.0), signal(1.0), signal(0.9), signal(0.1))


def l1() -> ModelSpec:
    return two_class(GrowthFunction.logistic(), signal(2.0), signal(1.0), signal(0.9), signal(0.1))


def p1(tau0=TAU0, tau1=TAU1) -> ModelSpec:
    return two_class(GrowthFunction.logistic(), signal(2.0, cos=[1.0]), signal(1.0),
                     signal(0.8, sin=[0.1]), signal(0.15, cos=[0.05]), tau0, tau1)


def s1(tau0=TAU0, tau1=TAU1) -> ModelSpec:
    return two_class(GrowthFunction.linear(), signal(2.0, sin=[1.0]), signal(1.0),
                     signal(0.5), signal(0.5), tau0, tau1)


def s2(tau0=TAU0, tau1=TAU1) -> ModelSpec:
    return two_class(GrowthFunction.logistic(), signal(2.0, sin=[1.0]), signal(1.0),
                     signal(0.3), signal(0.3), tau0, tau1)


SCENARIOS = {"E1": e1, "E2": e2, "L1": l1, "P1": p1, "S1": s1, "S2": s2}
