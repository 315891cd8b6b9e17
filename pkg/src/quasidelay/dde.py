"""Fixed-step method of steps for delay differential systems.

Classical RK4 advances the state on a uniform grid. Delayed arguments are
read from a cubic Hermite interpolant built on the stored nodes (states plus
right-hand-side values). When a delayed argument falls inside the step being
computed, the step is taken twice: first against an extrapolated guess of the
step, then against the Hermite cubic of the predicted step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .model import CLIP_EPS, ModelSpec, max_delay

BLOWUP_EPS = 1e-6


class HistoryUnderflowError(LookupError):
    """A delayed argument reaches before the stored window."""


class OutOfWindowError(LookupError):
    pass


class BlowUpError(RuntimeError):
    """State left the unit box by more than the blow-up tolerance."""


class StepSizeError(ValueError):
    pass


def hermite(t0, y0, d0, t1, y1, d1, t):
    """Cubic Hermite value at ``t`` for data (y, dy/dt) given at t0 and t1."""
    h = t1 - t0
    s = (t - t0) / h
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def as_history(initial) -> Callable[[float], np.ndarray]:
    if callable(initial):
        return lambda t: np.asarray(initial(t), dtype=float)
    const = np.array(initial, dtype=float)
    return lambda t: const


class HistorySegment:
    """Dense record of a solution on a uniform grid ``t0 + k*h``.

    Times before ``t0`` are answered by the initial history function. Nodes
    older than ``keep`` steps behind the newest one are discarded unless
    ``keep`` is None.
    """

    def __init__(self, t0: float, h: float, dim: int, prehistory=None,
                 prehistory_span: float = 0.0, keep: int | None = None):
        self.t0 = float(t0)
        self.h = float(h)
        self.dim = dim
        self.prehistory = prehistory
        self.prehistory_start = self.t0 - prehistory_span
        self.keep = keep
        cap = 64 if keep is None else 2 * keep + 16
        self._y = np.empty((cap, dim))
        self._d = np.empty((cap, dim))
        self._base = 0  # global index of row 0
        self._count = 0

    def __len__(self):
        return self._count

    @property
    def last_index(self) -> int:
        return self._base + self._count - 1

    def time(self, k: int) -> float:
        return self.t0 + k * self.h

    @property
    def node_times(self) -> np.ndarray:
        return self.t0 + (self._base + np.arange(self._count)) * self.h

    @property
    def node_states(self) -> np.ndarray:
        return self._y[:self._count]

    @property
    def node_derivatives(self) -> np.ndarray:
        return self._d[:self._count]

    @property
    def window_start(self) -> float:
        if self._base == 0 and self.prehistory is not None:
            return self.prehistory_start
        return self.time(self._base)

    @property
    def window_end(self) -> float:
        return self.time(self.last_index)

    def append(self, y, d):
        if self._count == len(self._y):
            if self.keep is None:
                self._y = np.concatenate([self._y, np.empty_like(self._y)])
                self._d = np.concatenate([self._d, np.empty_like(self._d)])
            else:
                drop = self._count - self.keep
                self._y[:self.keep] = self._y[drop:self._count]
                self._d[:self.keep] = self._d[drop:self._count]
                self._base += drop
                self._count = self.keep
        self._y[self._count] = y
        self._d[self._count] = d
        self._count += 1

    def set_last_derivative(self, d):
        self._d[self._count - 1] = d

    def state(self, k: int) -> np.ndarray:
        return self._y[k - self._base]

    def derivative(self, k: int) -> np.ndarray:
        return self._d[k - self._base]

    def value(self, t: float, component: int | None = None):
        """Interpolated state (or one component) at time ``t``."""
        if t < self.t0:
            if self.prehistory is None or self._base > 0 or t < self.prehistory_start - 1e-12 * max(1.0, abs(t)):
                raise HistoryUnderflowError(f"t={t} precedes history window starting at {self.window_start}")
            v = self.prehistory(t)
            return v if component is None else v[component]
        pos = (t - self.t0) / self.h
        k = int(math.floor(pos))
        last = self.last_index
        if k >= last:
            if k == last and pos == last:
                row = self._y[k - self._base]
                return row.copy() if component is None else row[component]
            raise OutOfWindowError(f"t={t} beyond history end {self.window_end}")
        if k < self._base:
            raise HistoryUnderflowError(f"t={t} precedes history window starting at {self.window_start}")
        r = k - self._base
        if component is None:
            y0, y1, d0, d1 = self._y[r], self._y[r + 1], self._d[r], self._d[r + 1]
        else:
            y0, y1 = self._y[r, component], self._y[r + 1, component]
            d0, d1 = self._d[r, component], self._d[r + 1, component]
        if pos == k:
            return y0.copy() if component is None else y0
        t0 = self.t0 + k * self.h
        return hermite(t0, y0, d0, t0 + self.h, y1, d1, t)


def interpolate(history: HistorySegment, t: float) -> np.ndarray:
    """Out-of-window queries raise (before the window or after its end)."""
    if t > history.window_end:
        raise OutOfWindowError(f"t={t} beyond history end {history.window_end}")
    return history.value(t)


class DelayProblem(Protocol):
    """What the stepper needs from a concrete system.

    ``key`` is the half-step index ``2*step + c`` (c = 0, 1, 2 for the left
    end, midpoint and right end of a step); tabulated problems use it to
    look up periodic coefficients, others may ignore it.
    """

    dim: int
    lag_components: Sequence[int]

    def delays(self, t: float, key: int) -> np.ndarray: ...

    def field(self, t: float, key: int, x: np.ndarray, z: np.ndarray) -> np.ndarray: ...


class MethodOfSteps:
    """RK4 stepper over a :class:`HistorySegment`.

    ``box`` turns on the unit-box guard for concentration models: components
    beyond ``clip_tolerance`` outside [0, 1] are projected back and counted,
    components beyond ``BLOWUP_EPS`` raise :class:`BlowUpError`.
    """

    def __init__(self, problem: DelayProblem, initial_history, t0: float, h: float,
                 max_lag: float, initial_state=None, keep_all: bool = False,
                 box: bool = False, clip_tolerance: float = CLIP_EPS):
        if not h > 0:
            raise StepSizeError(f"step must be positive, got {h}")
        self.problem = problem
        self.h = float(h)
        self.box = box
        self.clip_tolerance = clip_tolerance
        self.clip_count = 0
        self.lags = np.asarray(problem.lag_components, dtype=int)
        pre = as_history(initial_history)
        keep = None if keep_all else int(math.ceil(max_lag / h)) + 3
        self.history = HistorySegment(t0, h, problem.dim, pre, max_lag, keep)
        x0 = pre(t0) if initial_state is None else np.asarray(initial_state, dtype=float)
        x0 = np.array(x0, dtype=float).reshape(problem.dim)
        self.step_index = 0
        x0 = self._guard(x0)
        self.x = x0
        self.history.append(x0, np.zeros(problem.dim))
        self.dx = self._end_derivative(0, x0, None)
        self.history.set_last_derivative(self.dx)

    @property
    def t(self) -> float:
        return self.history.time(self.step_index)

    def _lagged(self, ts, key, xs, provisional):
        """Delayed values at stage time ``ts``; flags reads inside the open step."""
        taus = self.problem.delays(ts, key)
        z = np.empty(len(self.lags))
        t_last = self.history.window_end
        used = False
        for m, comp in enumerate(self.lags):
            tau = taus[m]
            if tau <= 0.0:
                z[m] = xs[comp]
                continue
            s = ts - tau
            if s <= t_last:
                z[m] = self.history.value(s, comp)
            else:
                z[m] = provisional(s, comp)
                used = True
        return z, used

    def _extrapolate(self, s, comp):
        k = self.step_index
        if k == 0:
            return self.x[comp] + (s - self.t) * self.dx[comp]
        hist = self.history
        t0 = hist.time(k - 1)
        return hermite(t0, hist.state(k - 1)[comp], hist.derivative(k - 1)[comp],
                       self.t, self.x[comp], self.dx[comp], s)

    def _rk4(self, provisional):
        h = self.h
        t, x, k1 = self.t, self.x, self.dx
        key = 2 * self.step_index
        prob = self.problem
        tm = t + 0.5 * h
        x2 = x + 0.5 * h * k1
        z, u2 = self._lagged(tm, key + 1, x2, provisional)
        k2 = prob.field(tm, key + 1, x2, z)
        x3 = x + 0.5 * h * k2
        z, u3 = self._lagged(tm, key + 1, x3, provisional)
        k3 = prob.field(tm, key + 1, x3, z)
        x4 = x + h * k3
        z, u4 = self._lagged(t + h, key + 2, x4, provisional)
        k4 = prob.field(t + h, key + 2, x4, z)
        return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), (u2 or u3 or u4)

    def _end_derivative(self, step, x, provisional):
        t = self.history.time(step)
        z, _ = self._lagged(t, 2 * step, x, provisional)
        return self.problem.field(t, 2 * step, x, z)

    def _guard(self, x):
        if not self.box:
            return x
        lo, hi = x.min(), x.max()
        if lo >= -self.clip_tolerance and hi <= 1.0 + self.clip_tolerance:
            return x
        if not (lo >= -BLOWUP_EPS and hi <= 1.0 + BLOWUP_EPS):
            raise BlowUpError(f"state {x} left [0,1] at t={self.t}")
        self.clip_count += 1
        return np.clip(x, 0.0, 1.0)

    def step(self) -> np.ndarray:
        """Advance one step; returns the new node state."""
        x_new, used = self._rk4(self._extrapolate)
        if used:
            t0, x0, d0, h = self.t, self.x, self.dx, self.h
            d_pred = self._end_derivative(self.step_index + 1, x_new, self._extrapolate)

            def predicted(s, comp, x1=x_new, d1=d_pred):
                return hermite(t0, x0[comp], d0[comp], t0 + h, x1[comp], d1[comp], s)

            x_new, _ = self._rk4(predicted)
            d_pred = self._end_derivative(self.step_index + 1, x_new, predicted)

            def final(s, comp, x1=x_new, d1=d_pred):
                return hermite(t0, x0[comp], d0[comp], t0 + h, x1[comp], d1[comp], s)
        else:
            final = self._extrapolate
        x_new = self._guard(x_new)
        d_new = self._end_derivative(self.step_index + 1, x_new, final)
        self.history.append(x_new, d_new)
        self.step_index += 1
        self.x, self.dx = x_new, d_new
        return x_new


class ModelProblem:
    """Right-hand side of the delayed quasispecies system on a fixed grid.

    Coefficients are tabulated once per period at half-step resolution,
    which is exact because ``h`` divides the period.
    """

    def __init__(self, spec: ModelSpec, t0: float, h: float):
        self.spec = spec
        self.dim = spec.species_count
        self.lag_components = list(range(self.dim))
        steps = int(round(spec.period / h))
        if abs(steps * h - spec.period) > 1e-12 * spec.period:
            raise StepSizeError(f"step {h} does not divide the period {spec.period}")
        self.table_size = 2 * steps
        ts = t0 + np.arange(self.table_size) * (0.5 * h)
        self._f = np.stack([f(ts) for f in spec.rates], axis=1)
        self._tau = np.stack([tau(ts) for tau in spec.delays], axis=1)
        self._q = np.stack([np.stack([q(ts) for q in row], axis=1) for row in spec.mutation], axis=1)
        self._coef = spec.growth.poly[::-1].tolist()

    def delays(self, t, key):
        return self._tau[key % self.table_size]

    def _psi(self, z):
        coef = self._coef
        acc = coef[0] * z + coef[1] if len(coef) > 1 else np.full_like(z, coef[0])
        for c in coef[2:]:
            acc = acc * z + c
        return acc

    def field(self, t, key, x, z):
        k = key % self.table_size
        w = self._f[k] * self._psi(z)
        return w @ self._q[k] - x * w.sum()


def model_field(spec: ModelSpec, t: float, x, z) -> np.ndarray:
    """Quasispecies vector field given the delayed components ``z_j = x_j(t - tau_j(t))``."""
    w = spec.rates_at(t) * spec.growth.value(np.asarray(z, dtype=float))
    return w @ spec.mutation_at(t) - np.asarray(x, dtype=float) * w.sum()


def rhs(spec: ModelSpec, t: float, state, history: HistorySegment) -> np.ndarray:
    """Time derivative of the state at ``t``, delayed values read from ``history``."""
    taus = spec.delays_at(t)
    z = np.empty(spec.species_count)
    for j, tau in enumerate(taus):
        s = t - tau
        if s < history.window_start:
            raise HistoryUnderflowError(f"t - tau_{j}(t) = {s} precedes window start {history.window_start}")
        if tau <= 0.0:
            z[j] = state[j]
        else:
            z[j] = history.value(s, j)
    return model_field(spec, t, state, z)


@dataclass
class IntegrationConfig:
    step: float
    t_end: float
    clip_tolerance: float = CLIP_EPS
    record_stride: int = 1

    def __post_init__(self):
        if not self.step > 0:
            raise StepSizeError(f"step must be positive, got {self.step}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    def effective_step(self, period: float) -> float:
        """Largest step not above ``step`` that divides ``period``."""
        m = math.ceil(period / self.step - 1e-9)
        return period / m


@dataclass
class Trajectory:
    sample_times: np.ndarray
    sample_states: np.ndarray
    simplex_deviation: np.ndarray
    clip_count: int = 0
    step: float = float("nan")

    def __len__(self):
        return len(self.sample_times)

    def max_deviation(self) -> float:
        return float(np.max(self.simplex_deviation)) if len(self) else 0.0

    def to_csv(self, path):
        write_csv(path, self.sample_times, self.sample_states, self.simplex_deviation)


def write_csv(path, times, states, deviation=None):
    states = np.asarray(states)
    if deviation is None:
        deviation = np.abs(states.sum(axis=1) - 1.0)
    dim = states.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *[f"x{i}" for i in range(dim)], "sum_deviation"])
        for t, row, dev in zip(times, states, deviation):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in row), repr(float(dev))])


def read_csv(path):
    """Inverse of :func:`write_csv`: returns (times, states, deviation)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:-1], data[:, -1]


def model_stepper(spec: ModelSpec, initial_history, t0: float, h: float,
                  initial_state=None, clip_tolerance: float = CLIP_EPS,
                  keep_all: bool = False) -> MethodOfSteps:
    problem = ModelProblem(spec, t0, h)
    return MethodOfSteps(problem, initial_history, t0, h, max_delay(spec),
                         initial_state=initial_state, keep_all=keep_all, box=True,
                         clip_tolerance=clip_tolerance)


def integrate(spec: ModelSpec, initial_history, t0: float, config: IntegrationConfig,
              initial_state=None) -> Trajectory:
    """Integrate the model from ``t0`` to ``config.t_end``.

    ``initial_history`` is a constant state or a callable on
    [t0 - max delay, t0]; ``initial_state`` overrides its value at ``t0``.
    """
    h = config.effective_step(spec.period)
    stepper = model_stepper(spec, initial_history, t0, h, initial_state, config.clip_tolerance)
    n_steps = max(0, math.ceil((config.t_end - t0) / h - 1e-9))
    stride = config.record_stride
    times, states = [stepper.t], [stepper.x]
    for k in range(1, n_steps + 1):
        x = stepper.step()
        if k % stride == 0:
            times.append(stepper.t)
            states.append(x)
    states = np.array(states)
    dev = np.abs(states.sum(axis=1) - 1.0)
    return Trajectory(np.array(times), states, dev, stepper.clip_count, h)


@dataclass
class ScalarDelayProblem:
    """Single-equation DDE ``x'(t) = g(t, x(t), x(t - tau))`` with a constant lag."""

    func: Callable[[float, float, float], float]
    tau: float
    dim: int = 1
    lag_components: Sequence[int] = field(default_factory=lambda: [0])

    def delays(self, t, key):
        return (self.tau,)

    def field(self, t, key, x, z):
        return np.array([self.func(t, x[0], z[0])])


def solve_scalar_dde(func, tau: float, history, t0: float, t_end: float, h: float):
    """Integrate a scalar constant-lag DDE; returns (times, values)."""
    stepper = MethodOfSteps(ScalarDelayProblem(func, tau), lambda t: np.array([history(t)]),
                            t0, h, tau)
    n = math.ceil((t_end - t0) / h - 1e-9)
    out = [stepper.x[0]]
    for _ in range(n):
        out.append(stepper.step()[0])
    return t0 + h * np.arange(n + 1), np.array(out)
