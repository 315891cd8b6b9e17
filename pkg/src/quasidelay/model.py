"""Model family for the delayed quasispecies system.

A model couples n+1 replicator classes through a growth nonlinearity psi,
T-periodic replication rates f_j, T-periodic delays tau_j and a T-periodic
mutation matrix Q[j][i] (probability that class j produces class i).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

CLIP_EPS = 1e-9
HYPOTHESIS_SAMPLES = 4096
STOCHASTIC_SAMPLES = 256
STOCHASTIC_TOL = 1e-12
PSI_SAMPLES = 1024


class DomainError(ValueError):
    """Argument outside the admissible state interval."""


class GrowthKind(str, enum.Enum):
    LINEAR = "Linear"
    LOGISTIC = "Logistic"
    CUSTOM_POLYNOMIAL = "CustomPolynomial"


@dataclass(frozen=True)
class GrowthFunction:
    """Growth nonlinearity psi on [0, 1].

    Every supported kind is a polynomial; ``coefficients`` are only read
    for ``CustomPolynomial`` and are given in increasing-power order.
    """

    kind: GrowthKind = GrowthKind.LINEAR
    coefficients: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", GrowthKind(self.kind))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.kind is GrowthKind.CUSTOM_POLYNOMIAL and not self.coefficients:
            raise ValueError("CustomPolynomial growth needs at least one coefficient")

    @classmethod
    def linear(cls) -> "GrowthFunction":
        return cls(GrowthKind.LINEAR)

    @classmethod
    def logistic(cls) -> "GrowthFunction":
        return cls(GrowthKind.LOGISTIC)

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> "GrowthFunction":
        return cls(GrowthKind.CUSTOM_POLYNOMIAL, tuple(coefficients))

    @property
    def poly(self) -> np.ndarray:
        """Coefficients in increasing-power order, for every kind."""
        if self.kind is GrowthKind.LINEAR:
            return np.array([0.0, 1.0])
        if self.kind is GrowthKind.LOGISTIC:
            return np.array([0.0, 1.0, -1.0])
        return np.array(self.coefficients)

    @property
    def dpoly(self) -> np.ndarray:
        c = self.poly
        if len(c) == 1:
            return np.zeros(1)
        return c[1:] * np.arange(1, len(c))

    def value(self, x):
        """Unchecked evaluation (vectorised)."""
        return np.polynomial.polynomial.polyval(x, self.poly)

    def derivative(self, x):
        return np.polynomial.polynomial.polyval(x, self.dpoly)


def _check_domain(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < -CLIP_EPS) or np.any(arr > 1.0 + CLIP_EPS) or np.any(np.isnan(arr)):
        raise DomainError(f"growth argument {x!r} outside [0, 1]")


def psi(growth: GrowthFunction, x):
    _check_domain(x)
    return growth.value(x)


def psi_prime(growth: GrowthFunction, x):
    _check_domain(x)
    return growth.derivative(x)


@dataclass(frozen=True)
class PeriodicSignal:
    """Finite Fourier sum ``mean + sum_k a_k cos(2 pi k t/T) + b_k sin(2 pi k t/T)``."""

    period: float
    mean_term: float = 0.0
    cosine_coeffs: tuple[float, ...] = ()
    sine_coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "mean_term", float(self.mean_term))
        object.__setattr__(self, "cosine_coeffs", tuple(float(c) for c in self.cosine_coeffs))
        object.__setattr__(self, "sine_coeffs", tuple(float(c) for c in self.sine_coeffs))

    @classmethod
    def constant(cls, value: float, period: float) -> "PeriodicSignal":
        return cls(period, value)

    @property
    def is_constant(self) -> bool:
        return not any(self.cosine_coeffs) and not any(self.sine_coeffs)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        # reduce phase first so value(t + T) == value(t) up to rounding of the modulo
        phase = 2.0 * np.pi * (np.mod(t, self.period) / self.period)
        out = np.full(t.shape, self.mean_term)
        for k, a in enumerate(self.cosine_coeffs, start=1):
            if a:
                out = out + a * np.cos(k * phase)
        for k, b in enumerate(self.sine_coeffs, start=1):
            if b:
                out = out + b * np.sin(k * phase)
        return out if out.ndim else float(out)

    value = __call__

    def grid(self, samples: int = HYPOTHESIS_SAMPLES) -> np.ndarray:
        return self(np.arange(samples) * (self.period / samples))


@dataclass(frozen=True)
class ModelSpec:
    """Complete description of an (n+1)-species delayed quasispecies system.

    ``mutation[j][i]`` is Q_ji, the probability that replication of class j
    yields class i, so rows are expected to sum to one.
    """

    species_count: int
    period: float
    growth: GrowthFunction
    rates: tuple[PeriodicSignal, ...]
    delays: tuple[PeriodicSignal, ...]
    mutation: tuple[tuple[PeriodicSignal, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(self.rates))
        object.__setattr__(self, "delays", tuple(self.delays))
        object.__setattr__(self, "mutation", tuple(tuple(row) for row in self.mutation))
        n = self.species_count
        if n < 2:
            raise ValueError("species_count must be at least 2")
        if len(self.rates) != n or len(self.delays) != n:
            raise ValueError("rates and delays need one signal per species")
        if len(self.mutation) != n or any(len(row) != n for row in self.mutation):
            raise ValueError("mutation must be a species_count x species_count grid")

    @property
    def n(self) -> int:
        """Index of the last species (species_count - 1)."""
        return self.species_count - 1

    def signals(self):
        yield from self.rates
        yield from self.delays
        for row in self.mutation:
            yield from row

    def rates_at(self, t) -> np.ndarray:
        return np.array([f(t) for f in self.rates])

    def delays_at(self, t) -> np.ndarray:
        return np.array([tau(t) for tau in self.delays])

    def mutation_at(self, t) -> np.ndarray:
        return np.array([[q(t) for q in row] for row in self.mutation])

    def with_constant_delays(self, value: float) -> "ModelSpec":
        delays = tuple(PeriodicSignal.constant(value, self.period) for _ in range(self.species_count))
        return ModelSpec(self.species_count, self.period, self.growth, self.rates, delays, self.mutation)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_growth(growth: GrowthFunction) -> list[str]:
    problems = []
    if growth.value(0.0) != 0.0:
        problems.append(f"psi(0) = {growth.value(0.0)!r}, must be exactly 0")
    xs = np.linspace(0.0, 1.0, PSI_SAMPLES + 2)
    vals = growth.value(xs)
    if np.any(vals[1:-1] <= 0.0):
        bad = xs[1:-1][vals[1:-1] <= 0.0][0]
        problems.append(f"psi not strictly positive on ]0,1[ (psi({bad:.6g}) <= 0)")
    if np.any(vals < -CLIP_EPS) or np.any(vals > 1.0 + CLIP_EPS):
        problems.append("psi leaves [0, 1] on [0, 1]")
    return problems


def validate_model(spec: ModelSpec) -> ValidationReport:
    """Collect every violated structural hypothesis of ``spec``."""
    report = ValidationReport()
    v = report.violations
    T = spec.period
    for name, sig in _named_signals(spec):
        if abs(sig.period - T) > 1e-12 * T:
            v.append(f"{name} has period {sig.period}, model period is {T}")
    v.extend(validate_growth(spec.growth))

    for j, f in enumerate(spec.rates):
        vals = f.grid()
        if np.any(vals <= 0.0):
            v.append(f"rate f_{j} not strictly positive (min {vals.min():.6g})")
    for j, tau in enumerate(spec.delays):
        vals = tau.grid()
        if np.any(vals < 0.0):
            v.append(f"delay tau_{j} negative (min {vals.min():.6g})")
    for j, row in enumerate(spec.mutation):
        for i, q in enumerate(row):
            vals = q.grid()
            if np.any(vals < 0.0) or np.any(vals > 1.0):
                v.append(f"Q_{j}{i} outside [0,1] (range [{vals.min():.6g}, {vals.max():.6g}])")
        ts = np.arange(STOCHASTIC_SAMPLES) * (T / STOCHASTIC_SAMPLES)
        sums = np.sum([q(ts) for q in row], axis=0)
        worst = sums[np.argmax(np.abs(sums - 1.0))]
        if abs(worst - 1.0) > STOCHASTIC_TOL:
            v.append(f"mutation row {j} sum {worst:.12g} != 1")
    return report


def _named_signals(spec: ModelSpec):
    for j, f in enumerate(spec.rates):
        yield f"f_{j}", f
    for j, tau in enumerate(spec.delays):
        yield f"tau_{j}", tau
    for j, row in enumerate(spec.mutation):
        for i, q in enumerate(row):
            yield f"Q_{j}{i}", q


def max_delay(spec: ModelSpec) -> float:
    """Largest delay over all species on a dense one-period grid."""
    return float(max(np.max(tau.grid()) for tau in spec.delays))
