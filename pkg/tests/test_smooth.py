import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ccbf.smooth import AnnealSchedule, SmoothKind, f_theta, grad_f_theta, theta_init, theta_levels, theta_next

KINDS = list(SmoothKind)
xs = st.floats(0, 1e3, allow_nan=False)
thetas = st.floats(1e-4, 1e2)


@pytest.mark.parametrize("kind", KINDS)
def test_zero(kind):
    assert f_theta(kind, 0.0, 0.3) == 0


def test_examples():
    assert f_theta("arctan", 2.0, 2.0) == pytest.approx(math.pi / 4)
    assert f_theta("log", 1.0, 0.37) == pytest.approx(1.0)
    assert grad_f_theta("arctan", 0.0, 0.2) == pytest.approx(5.0)
    assert grad_f_theta("exp", 0.0, 0.2) == pytest.approx(5.0)


@pytest.mark.parametrize("kind", KINDS)
def test_domain_errors(kind):
    with pytest.raises(ValueError):
        f_theta(kind, -1.0, 1.0)
    with pytest.raises(ValueError):
        grad_f_theta(kind, 1.0, 0.0)


@given(st.sampled_from(KINDS), xs, xs, st.floats(0, 1), thetas)
def test_concave(kind, a, b, lam, th):
    mid = f_theta(kind, lam * a + (1 - lam) * b, th)
    assert mid >= lam * f_theta(kind, a, th) + (1 - lam) * f_theta(kind, b, th) - 1e-12


MP_F = {
    SmoothKind.LOG: lambda x, t: mpmath.log(x / t + 1) / mpmath.log(1 / t + 1),
    SmoothKind.EXP: lambda x, t: 1 - mpmath.exp(-x / t),
    SmoothKind.ARCTAN: lambda x, t: mpmath.atan(x / t),
}


def exact_gap(kind, lo, hi, th):
    with mpmath.workdps(500):
        lo, hi, th = (mpmath.mpf(float(v)) for v in (lo, hi, th))
        return MP_F[SmoothKind(kind)](hi, th) - MP_F[SmoothKind(kind)](lo, th)


@given(st.sampled_from(KINDS), xs, st.floats(1e-3, 10), st.floats(0.01, 10))
def test_strictly_increasing(kind, a, gap, th):
    b = a + gap * th
    fa, fb = f_theta(kind, a, th), f_theta(kind, b, th)
    assert fb >= fa
    # strict wherever float64 can resolve the exact increase (exp saturates to 1.0)
    if exact_gap(kind, a, b, th) > 2 * np.finfo(float).eps * abs(fb):
        assert fb > fa


@given(st.sampled_from(KINDS), xs, xs, thetas)
def test_first_order_upper_bound(kind, x, x0, th):
    bound = f_theta(kind, x0, th) + grad_f_theta(kind, x0, th) * (x - x0)
    assert f_theta(kind, x, th) <= bound + 1e-9 * (1 + abs(bound))




def mp_central_difference(kind, x, th):
    # in float64 the difference cancels once f saturates near its limit (exp
    # reaches 1 - 1e-350 on this grid), hence the 500 digits
    with mpmath.workdps(500):
        x, th = mpmath.mpf(x), mpmath.mpf(th)
        h = mpmath.mpf(10) ** -15 * max(x, th)
        return (MP_F[kind](x + h, th) - MP_F[kind](x - h, th)) / (2 * h)


@given(st.sampled_from(KINDS), st.floats(1e-3, 10), st.floats(1e-2, 10))
def test_gradient_matches_finite_difference(kind, x, th):
    fd = mp_central_difference(kind, x, th)
    g = grad_f_theta(kind, x, th)
    assert g > 0
    if fd > np.finfo(float).tiny:  # otherwise the true slope is not a float64 number
        assert abs(float(fd) - g) <= 1e-5 * g


def test_exp_gradient_positive_past_underflow():
    assert grad_f_theta(SmoothKind.EXP, 8.0, 0.01) > 0
    assert np.all(grad_f_theta(SmoothKind.EXP, np.array([0.0, 1e3]), 1e-4) > 0)


@given(st.sampled_from(KINDS), st.floats(1e-3, 10), st.floats(1e-2, 10))
def test_value_matches_high_precision(kind, x, th):
    with mpmath.workdps(50):
        ref = float(MP_F[kind](mpmath.mpf(x), mpmath.mpf(th)))
    assert f_theta(kind, x, th) == pytest.approx(ref, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("kind,limit", [("log", 1.0), ("exp", 1.0), ("arctan", math.pi / 2)])
def test_small_theta_limit(kind, limit):
    vals = [f_theta(kind, 0.5, t) for t in (1e-3, 1e-12, 1e-200)]
    assert abs(vals[-1] - limit) <= 1e-2 * limit
    assert abs(vals[0] - limit) >= abs(vals[1] - limit) >= abs(vals[2] - limit)
    assert f_theta(kind, 0.0, 1e-12) == 0


def test_vectorised():
    x = np.array([0.0, 1.0, 2.0])
    assert f_theta("exp", x, 1.0).shape == (3,)
    assert np.allclose(grad_f_theta("arctan", x, 1.0), 1 / (1 + x**2))


def test_schedule():
    s = AnnealSchedule()
    assert (s.beta, s.epsilon) == (0.1, 1e-6)
    assert theta_next(1.0, s) == pytest.approx(0.1)
    assert theta_next(1e-6, s) is None
    assert theta_next(8.0, AnnealSchedule(beta=0.5)) == 4.0
    lv = theta_levels(1.0, s)
    assert len(lv) == 7 and lv[-1] == pytest.approx(1e-6)
    with pytest.raises(ValueError):
        AnnealSchedule(beta=1.0)
    with pytest.raises(ValueError):
        AnnealSchedule(theta0=1e-7)


def test_theta_init():
    assert theta_init([0.1, 2.5, 0.3]) == 2.5
    assert theta_init([0.0, 0.0]) == 1.0
    assert theta_init([0.42]) == 0.42
    with pytest.raises(ValueError):
        theta_init([])
