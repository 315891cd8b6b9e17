import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasidelay.averaging import (AlgebraicSolution, AveragedData, DegenerateRootError, QuadratureError,
                                  check_condition_C, corollary_linear_root, corollary_logistic_root,
                                  eval_N, eval_N_as_printed, localization_box, residual_S, solve_S,
                                  time_average)
from quasidelay.model import GrowthFunction
from quasidelay.scenarios import signal

LIN = GrowthFunction.linear()
LOG = GrowthFunction.logistic()
E1 = AveragedData.constant(2.0, 1.0, 0.9, 0.1)


def trapezoid_mean(func, period, n=10 ** 6):
    t = np.linspace(0.0, period, n + 1)
    v = func(t)
    return float(np.sum((v[1:] + v[:-1]) * 0.5) / n)


def fd_det(data, growth, x, y, h=1e-6):
    def r(a, b):
        return np.array(residual_S(data, growth, a, b))
    jx = (r(x + h, y) - r(x - h, y)) / (2 * h)
    jy = (r(x, y + h) - r(x, y - h)) / (2 * h)
    return jx[0] * jy[1] - jy[0] * jx[1]


# --- time averages -------------------------------------------------------

def test_average_of_shifted_sine():
    assert time_average(signal(2.0, sin=[1.0])) == pytest.approx(2.0, abs=1e-13)


def test_average_of_constant_product():
    assert time_average((signal(0.9), signal(2.0))) == pytest.approx(1.8, abs=1e-13)


def test_average_of_product_matches_brute_force():
    q = signal(0.8, sin=[0.1])
    f0 = signal(2.0, cos=[1.0])
    oracle = trapezoid_mean(lambda t: q(t) * f0(t), 1.0)
    assert oracle == pytest.approx(1.6, abs=1e-9)
    assert time_average((q, f0)) == pytest.approx(oracle, abs=1e-9)
    assert time_average((q, f0)) == pytest.approx(1.6, abs=1e-12)


def test_average_nonperiodic_callable_with_period():
    assert time_average(lambda t: t ** 2, period=3.0) == pytest.approx(3.0, abs=1e-12)


def test_average_non_convergence():
    with pytest.raises(QuadratureError):
        time_average(lambda t: (t > 1.0 / 3.0).astype(float), period=1.0, max_panels=2 ** 12)


def test_average_respects_period():
    s = signal(1.5, cos=[0.3, 0.2], sin=[0.4], period=2.5)
    assert time_average(s) == pytest.approx(1.5, abs=1e-13)


def test_averaged_data_from_periodic_signals():
    data = AveragedData.from_signals(signal(2.0, cos=[1.0]), signal(1.0),
                                     signal(0.8, sin=[0.1]), signal(0.15, cos=[0.05]))
    assert data.mean_f0 == pytest.approx(2.0, abs=1e-13)
    assert data.mean_qf0 == pytest.approx(1.6, abs=1e-13)
    assert data.mean_pf1 == pytest.approx(0.15, abs=1e-13)
    assert data.eta == pytest.approx(0.1, abs=1e-12)
    assert data.nu == pytest.approx(0.9, abs=1e-12)
    assert data.eta * data.mean_f0 <= data.mean_qf0 <= data.nu * data.mean_f0


# --- residuals and roots -------------------------------------------------

def test_residual_zero_at_logistic_closed_form():
    r1, r2 = residual_S(E1, LOG, 19 / 30, 11 / 30)
    assert abs(r1) <= 1e-15 and abs(r2) <= 1e-15


def test_residual_zero_at_linear_equal_rates():
    data = AveragedData.constant(1.0, 1.0, 0.9, 0.1)
    r1, r2 = residual_S(data, LIN, 0.5, 0.5)
    assert abs(r1) <= 1e-15 and abs(r2) <= 1e-15


@settings(max_examples=50, deadline=None)
@given(x=st.floats(0.0, 1.0), logistic=st.booleans())
def test_residuals_cancel_on_the_simplex(x, logistic):
    g = LOG if logistic else LIN
    r1, r2 = residual_S(E1, g, x, 1.0 - x)
    assert abs(r1 + r2) <= 1e-14


def test_solve_linear_distinct_rates():
    # 2x^2 ... reduces to x^2 - 0.7x - 0.1 = 0 for f0=2, f1=1, q=0.9, p=0.1
    expected = (math.sqrt(0.89) + 0.7) / 2
    roots = solve_S(E1, LIN)
    assert len(roots) == 1
    assert roots[0].x == pytest.approx(expected, abs=1e-10)
    assert roots[0].y == pytest.approx(1 - expected, abs=1e-10)
    assert roots[0].x == pytest.approx(0.8216990566, abs=1e-10)
    assert roots[0].residual_norm <= 1e-10
    assert roots[0].in_box


def test_solve_logistic():
    roots = solve_S(E1, LOG)
    assert len(roots) == 1
    assert roots[0].x == pytest.approx(19 / 30, abs=1e-10)
    assert roots[0].y == pytest.approx(11 / 30, abs=1e-10)


def test_solve_symmetric():
    roots = solve_S(AveragedData.constant(1.0, 1.0, 0.5, 0.5), LIN)
    assert len(roots) == 1
    assert (roots[0].x, roots[0].y) == pytest.approx((0.5, 0.5), abs=1e-12)


def test_corner_zeros_are_excluded():
    # psi(0) = 0 makes (0, 0) a root of the residual, outside the open square
    assert residual_S(E1, LIN, 0.0, 0.0) == (0.0, 0.0)
    assert all(min(r.x, r.y) > 0.01 for r in solve_S(E1, LIN))


def test_closed_forms():
    assert corollary_linear_root(E1)[0] == pytest.approx((math.sqrt(0.89) + 0.7) / 2, abs=1e-15)
    assert corollary_linear_root(AveragedData.constant(1, 1, 0.9, 0.1)) == pytest.approx((0.5, 0.5))
    assert corollary_logistic_root(E1) == pytest.approx((19 / 30, 11 / 30), abs=1e-15)


positive = st.floats(0.2, 5.0)
prob = st.floats(0.02, 0.98)


@settings(max_examples=40, deadline=None)
@given(f0=positive, f1=positive, q=prob, p=prob, logistic=st.booleans())
def test_unique_root_matches_closed_form(f0, f1, q, p, logistic):
    data = AveragedData.constant(f0, f1, q, p)
    g = LOG if logistic else LIN
    roots = solve_S(data, g)
    assert len(roots) == 1
    cf = corollary_logistic_root(data) if logistic else corollary_linear_root(data)
    assert roots[0].x == pytest.approx(cf[0], abs=1e-10)
    assert roots[0].y == pytest.approx(cf[1], abs=1e-10)
    assert abs(roots[0].x + roots[0].y - 1) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(f0=positive, a0=st.floats(0, 0.19), f1=positive, b1=st.floats(0, 0.19),
       qm=st.floats(0.25, 0.75), qa=st.floats(0.0, 0.2), pm=st.floats(0.25, 0.75), pa=st.floats(0.0, 0.2),
       logistic=st.booleans())
def test_roots_lie_in_localization_box(f0, a0, f1, b1, qm, qa, pm, pa, logistic):
    data = AveragedData.from_signals(signal(f0, cos=[a0 * f0]), signal(f1, sin=[b1 * f1]),
                                     signal(qm, sin=[qa]), signal(pm, cos=[pa]))
    if not data.eta < data.nu:
        return
    box = localization_box(data)
    for r in solve_S(data, LOG if logistic else LIN):
        assert box.contains(r.x, r.y)
        assert r.in_box
        assert abs(r.x + r.y - 1) <= 1e-9


# --- Jacobian determinant ------------------------------------------------

def test_N_hand_value():
    data = AveragedData.constant(1.0, 1.0, 0.5, 0.5)
    assert eval_N(data, LIN, 0.5, 0.5) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("growth", [LIN, LOG], ids=["linear", "logistic"])
def test_N_matches_finite_difference(growth):
    rng = np.random.default_rng(7)
    data = AveragedData.from_signals(signal(2.0, cos=[1.0]), signal(1.0), signal(0.8, sin=[0.1]),
                                     signal(0.15, cos=[0.05]))
    for x, y in rng.uniform(0.05, 0.95, size=(100, 2)):
        n = eval_N(data, growth, x, y)
        fd = fd_det(data, growth, x, y)
        assert abs(n - fd) <= 1e-6 * abs(fd)


def test_printed_N_reading():
    # identical for linear growth, differs when psi' is not constant
    assert eval_N_as_printed(E1, LIN, 0.3, 0.6) == pytest.approx(eval_N(E1, LIN, 0.3, 0.6), rel=1e-14)
    assert eval_N_as_printed(E1, LOG, 0.3, 0.6) != pytest.approx(eval_N(E1, LOG, 0.3, 0.6), rel=1e-6)


def test_N_sign_stable_for_logistic():
    rng = np.random.default_rng(11)
    signs = set()
    for _ in range(10):
        a0, b1 = rng.uniform(0, 0.9, 2)
        data = AveragedData.from_signals(signal(2.0, cos=[a0 * 2.0]), signal(1.0, sin=[b1]),
                                         signal(0.9), signal(0.1))
        (root,) = solve_S(data, LOG)
        signs.add(np.sign(root.n_value))
    assert len(signs) == 1


# --- condition C ---------------------------------------------------------

def _sol(n):
    return AlgebraicSolution(0.5, 0.5, 0.0, n, True)


def test_sign_sum_examples():
    assert check_condition_C([_sol(0.3)]).sign_sum == 1
    assert check_condition_C([_sol(0.3)]).condition_C_holds
    rep = check_condition_C([_sol(-2.0)])
    assert rep.sign_sum == -1 and rep.condition_C_holds
    rep = check_condition_C([_sol(1.0), _sol(-1.0)])
    assert rep.sign_sum == 0 and not rep.condition_C_holds


def test_empty_roots_fail_both_conditions():
    rep = check_condition_C([])
    assert not rep.condition_S_holds and not rep.condition_C_holds and not rep.teop_applicable


def test_degenerate_root_error():
    with pytest.raises(DegenerateRootError):
        check_condition_C([_sol(1e-12)])


@pytest.mark.parametrize("data, growth", [(E1, LIN), (AveragedData.constant(1, 1, 0.9, 0.1), LIN), (E1, LOG)])
def test_reference_sign_sums(data, growth):
    rep = check_condition_C(solve_S(data, growth), data)
    assert rep.sign_sum in (1, -1)
    assert rep.condition_C_holds and rep.teop_applicable


def test_applicability_needs_open_fidelity_range():
    data = AveragedData.constant(1.0, 1.0, 0.5, 0.5)
    rep = check_condition_C(solve_S(data, LIN), data)
    assert rep.condition_C_holds and not rep.teop_applicable
    assert any("eta == nu" in n for n in rep.notes)


# --- localization box ----------------------------------------------------

def test_box_constant_fidelities():
    box = localization_box(E1)
    assert (box.x_lo, box.x_hi, box.y_lo, box.y_hi) == pytest.approx((0.1, 0.9, 0.1, 0.9))
    assert box.contains(19 / 30, 11 / 30)


def test_box_from_sinusoids():
    data = AveragedData.from_signals(signal(1.0), signal(1.0), signal(0.8, sin=[0.1]), signal(0.15, cos=[0.05]))
    box = localization_box(data)
    assert box.x_lo == pytest.approx(0.1, abs=1e-12)
    assert box.x_hi == pytest.approx(0.9, abs=1e-12)


def test_collapsed_box_note():
    box = localization_box(AveragedData.constant(1, 1, 0.4, 0.4))
    assert box.collapsed and "collapsed" in box.note
    with pytest.raises(ValueError):
        localization_box(AveragedData.constant(1, 1, 1.0, 0.0))
