"""Time-averaged algebraic system of the two-class model.

Replacing every periodic coefficient by its one-period mean turns the
two-species delayed system into a pair of algebraic equations in (x, y).
Its roots in the open unit square, and the signs of the Jacobian
determinant at those roots, decide whether periodic orbits are guaranteed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import HYPOTHESIS_SAMPLES, GrowthFunction, ModelSpec, PeriodicSignal

GRID_SIZE = 256
SEED_THRESHOLD = 1e-3
NEWTON_TOL = 1e-12
NEWTON_MAXITER = 100
DEDUP_RADIUS = 1e-6
ROOT_RESIDUAL_MAX = 1e-10
DEGENERATE_TOL = 1e-10
BOX_TOL = 1e-9
# roots closer than this to the square's edge are the trivial corner zeros of psi
EDGE_MARGIN = 1e-8


class QuadratureError(ArithmeticError):
    pass


class DegenerateRootError(ArithmeticError):
    """A root of the averaged system has a (numerically) zero Jacobian determinant."""


def time_average(signal, period: float | None = None, tol: float = 1e-12,
                 start_panels: int = 64, max_panels: int = 2 ** 20) -> float:
    """Mean of a periodic signal over one period by composite Simpson.

    ``signal`` is a :class:`PeriodicSignal`, a pair of signals (their
    pointwise product is averaged), or any vectorised callable together
    with ``period``. Panels are doubled until two successive estimates
    agree to ``tol``.
    """
    if isinstance(signal, tuple):
        a, b = signal
        period = a.period if period is None else period
        func = lambda t: a(t) * b(t)  # noqa: E731
    else:
        func = signal
        if period is None:
            period = signal.period
    panels = start_panels
    prev = _simpson(func, period, panels)
    while panels < max_panels:
        panels *= 2
        cur = _simpson(func, period, panels)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise QuadratureError(f"Simpson average did not converge with {max_panels} panels")


def _simpson(func, period, panels):
    t = np.linspace(0.0, period, panels + 1)
    v = np.asarray(func(t), dtype=float) * np.ones_like(t)
    total = v[0] + v[-1] + 4.0 * v[1:-1:2].sum() + 2.0 * v[2:-1:2].sum()
    return float(total / (3.0 * panels))


@dataclass(frozen=True)
class AveragedData:
    mean_f0: float
    mean_f1: float
    mean_qf0: float
    mean_pf1: float
    eta: float
    nu: float

    @classmethod
    def from_spec(cls, spec: ModelSpec) -> "AveragedData":
        """Averages for the two-class model: q = Q_00, p = Q_10."""
        if spec.species_count != 2:
            raise ValueError("averaged system is defined for two species only")
        f0, f1 = spec.rates
        q, p = spec.mutation[0][0], spec.mutation[1][0]
        return cls.from_signals(f0, f1, q, p)

    @classmethod
    def from_signals(cls, f0: PeriodicSignal, f1: PeriodicSignal,
                     q: PeriodicSignal, p: PeriodicSignal) -> "AveragedData":
        qs, ps = q.grid(HYPOTHESIS_SAMPLES), p.grid(HYPOTHESIS_SAMPLES)
        return cls(
            mean_f0=time_average(f0),
            mean_f1=time_average(f1),
            mean_qf0=time_average((q, f0)),
            mean_pf1=time_average((p, f1)),
            eta=float(min(qs.min(), ps.min())),
            nu=float(max(qs.max(), ps.max())),
        )

    @classmethod
    def constant(cls, f0: float, f1: float, q: float, p: float) -> "AveragedData":
        return cls(f0, f1, q * f0, p * f1, min(p, q), max(p, q))


def residual_S(data: AveragedData, growth: GrowthFunction, x, y):
    """Residuals (r1, r2) of the averaged system at (x, y)."""
    px, py = growth.value(x), growth.value(y)
    outflow = data.mean_f0 * px + data.mean_f1 * py
    r1 = data.mean_qf0 * px + data.mean_pf1 * py - x * outflow
    r2 = (data.mean_f0 - data.mean_qf0) * px + (data.mean_f1 - data.mean_pf1) * py - y * outflow
    return r1, r2


def jacobian_S(data: AveragedData, growth: GrowthFunction, x: float, y: float) -> np.ndarray:
    d = data
    px, py = growth.value(x), growth.value(y)
    dpx, dpy = growth.derivative(x), growth.derivative(y)
    a = d.mean_qf0 * dpx - d.mean_f0 * (px + x * dpx) - d.mean_f1 * py
    b = (d.mean_pf1 - d.mean_f1 * x) * dpy
    c = (d.mean_f0 - d.mean_qf0 - d.mean_f0 * y) * dpx
    e = (d.mean_f1 - d.mean_pf1) * dpy - d.mean_f1 * (py + y * dpy) - d.mean_f0 * px
    return np.array([[a, b], [c, e]])


def eval_N(data: AveragedData, growth: GrowthFunction, x: float, y: float) -> float:
    """Jacobian determinant of the averaged field at (x, y)."""
    J = jacobian_S(data, growth, x, y)
    return float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])


def eval_N_as_printed(data: AveragedData, growth: GrowthFunction, x: float, y: float) -> float:
    """Same determinant with ``y*psi'(x)`` in the second diagonal entry.

    Kept for reporting; agrees with :func:`eval_N` whenever psi' is constant.
    """
    d = data
    px, py = growth.value(x), growth.value(y)
    dpx, dpy = growth.derivative(x), growth.derivative(y)
    first = d.mean_qf0 * dpx - d.mean_f0 * (px + x * dpx) - d.mean_f1 * py
    second = (d.mean_f1 - d.mean_pf1) * dpy - d.mean_f1 * (py + y * dpx) - d.mean_f0 * px
    cross = (d.mean_f0 - d.mean_qf0 - d.mean_f0 * y) * (d.mean_pf1 - d.mean_f1 * x) * dpx * dpy
    return float(first * second - cross)


@dataclass(frozen=True)
class Box:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    collapsed: bool = False

    def contains(self, x: float, y: float, tol: float = BOX_TOL) -> bool:
        return (self.x_lo - tol <= x <= self.x_hi + tol
                and self.y_lo - tol <= y <= self.y_hi + tol)

    @property
    def note(self) -> str:
        return "collapsed box: eta == nu, constant-solution regime" if self.collapsed else ""


def localization_box(data: AveragedData) -> Box:
    """Box [eta, nu] x [1 - nu, 1 - eta] that must hold every root."""
    eta, nu = data.eta, data.nu
    if not (0.0 < eta <= nu < 1.0):
        raise ValueError(f"need 0 < eta <= nu < 1, got eta={eta}, nu={nu}")
    return Box(eta, nu, 1.0 - nu, 1.0 - eta, collapsed=(eta == nu))


@dataclass
class AlgebraicSolution:
    x: float
    y: float
    residual_norm: float
    n_value: float
    in_box: bool | None
    n_value_as_printed: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "residual_norm": self.residual_norm,
            "N": self.n_value,
            "N_as_printed": self.n_value_as_printed,
            "in_box": self.in_box,
        }


def _newton(data, growth, x, y, tol=NEWTON_TOL, maxiter=NEWTON_MAXITER):
    r = np.array(residual_S(data, growth, x, y))
    norm = np.max(np.abs(r))
    for _ in range(maxiter):
        if norm < tol:
            break
        J = jacobian_S(data, growth, x, y)
        try:
            dx, dy = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return x, y, norm
        lam = 1.0
        while lam > 1e-6:
            xn, yn = x + lam * dx, y + lam * dy
            if -0.5 <= xn <= 1.5 and -0.5 <= yn <= 1.5:
                rn = np.array(residual_S(data, growth, xn, yn))
                nn = np.max(np.abs(rn))
                if nn < norm or nn < tol:
                    break
            lam *= 0.5
        else:
            return x, y, norm
        x, y, r, norm = xn, yn, rn, nn
    return float(x), float(y), float(norm)


def _grid_seeds(data, growth, size):
    g = (np.arange(size) + 0.5) / size
    X, Y = np.meshgrid(g, g, indexing="ij")
    r1, r2 = residual_S(data, growth, X, Y)
    F = r1 * r1 + r2 * r2
    padded = np.pad(F, 1, constant_values=np.inf)
    is_min = np.ones_like(F, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= F <= padded[1 + di:1 + di + size, 1 + dj:1 + dj + size]
    is_min &= F < SEED_THRESHOLD
    ii, jj = np.nonzero(is_min)
    return [(g[i], g[j]) for i, j in zip(ii, jj)]


def solve_S(data: AveragedData, growth: GrowthFunction, grid_size: int = GRID_SIZE) -> list[AlgebraicSolution]:
    """All roots of the averaged system in the open unit square.

    Grid minima of r1^2 + r2^2 seed a damped Newton iteration; converged
    roots are sorted and merged within ``DEDUP_RADIUS``.
    """
    roots = []
    for x0, y0 in _grid_seeds(data, growth, grid_size):
        x, y, norm = _newton(data, growth, x0, y0)
        if norm > ROOT_RESIDUAL_MAX:
            continue
        if min(x, y, 1.0 - x, 1.0 - y) < EDGE_MARGIN:
            continue
        roots.append((x, y, norm))
    roots.sort()
    unique = []
    for x, y, norm in roots:
        if unique and max(abs(x - unique[-1][0]), abs(y - unique[-1][1])) <= DEDUP_RADIUS:
            continue
        if any(max(abs(x - u[0]), abs(y - u[1])) <= DEDUP_RADIUS for u in unique):
            continue
        unique.append((x, y, norm))
    try:
        box = localization_box(data)
    except ValueError:
        box = None
    return [
        AlgebraicSolution(
            x=x, y=y, residual_norm=norm,
            n_value=eval_N(data, growth, x, y),
            in_box=None if box is None else box.contains(x, y),
            n_value_as_printed=eval_N_as_printed(data, growth, x, y),
        )
        for x, y, norm in unique
    ]


@dataclass
class DegreeReport:
    solutions: list[AlgebraicSolution]
    sign_sum: int
    condition_C_holds: bool
    condition_S_holds: bool
    teop_applicable: bool
    eta: float = float("nan")
    nu: float = float("nan")
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "roots": [s.as_dict() for s in self.solutions],
            "sign_sum": self.sign_sum,
            "condition_S": self.condition_S_holds,
            "condition_C": self.condition_C_holds,
            "periodic_existence_applicable": self.teop_applicable,
            "eta": self.eta,
            "nu": self.nu,
            "notes": list(self.notes),
        }


def check_condition_C(solutions: list[AlgebraicSolution], data: AveragedData | None = None) -> DegreeReport:
    """Sign sum of the Jacobian determinant over the roots.

    Raises :class:`DegenerateRootError` if any root has ``|N| < 1e-10``.
    The sum is reported without the leading minus of the degree formula.
    """
    for s in solutions:
        if abs(s.n_value) < DEGENERATE_TOL:
            raise DegenerateRootError(f"root ({s.x}, {s.y}) has N = {s.n_value}")
    sign_sum = int(sum(1 if s.n_value > 0 else -1 for s in solutions))
    holds_S = bool(solutions)
    holds_C = holds_S and sign_sum != 0
    notes = []
    eta = nu = float("nan")
    box_ok = False
    if data is not None:
        eta, nu = data.eta, data.nu
        box_ok = 0.0 < eta < nu < 1.0
        if eta == nu:
            notes.append("eta == nu: constant-solution regime, box collapses")
    for s in solutions:
        if not math.isnan(s.n_value_as_printed) and abs(s.n_value_as_printed - s.n_value) > 1e-12 * max(1.0, abs(s.n_value)):
            notes.append(f"printed N differs at ({s.x:.12g}, {s.y:.12g}): {s.n_value_as_printed!r} vs {s.n_value!r}")
    return DegreeReport(
        solutions=list(solutions),
        sign_sum=sign_sum,
        condition_C_holds=holds_C,
        condition_S_holds=holds_S,
        teop_applicable=holds_S and holds_C and box_ok,
        eta=eta,
        nu=nu,
        notes=notes,
    )


def corollary_linear_root(data: AveragedData) -> tuple[float, float]:
    """Closed-form root for psi(x) = x."""
    d = data
    if d.mean_f0 == d.mean_f1:
        den = d.mean_f0 + d.mean_pf1 - d.mean_qf0
        return d.mean_pf1 / den, (d.mean_f0 - d.mean_qf0) / den
    b = d.mean_f1 + d.mean_pf1 - d.mean_qf0
    disc = math.sqrt(b * b + 4.0 * d.mean_pf1 * (d.mean_f0 - d.mean_f1))
    # pick the cancellation-free of the two equivalent forms
    if b >= 0.0:
        x0 = 2.0 * d.mean_pf1 / (disc + b)
    else:
        x0 = (disc - b) / (2.0 * (d.mean_f0 - d.mean_f1))
    return x0, 1.0 - x0


def corollary_logistic_root(data: AveragedData) -> tuple[float, float]:
    """Closed-form root for psi(x) = x(1 - x)."""
    d = data
    den = d.mean_f0 + d.mean_f1
    return (d.mean_pf1 + d.mean_qf0) / den, (d.mean_f0 - d.mean_qf0 + d.mean_f1 - d.mean_pf1) / den
