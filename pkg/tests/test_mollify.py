import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minmove import mollify as Mo
from minmove.mollify import TimeSeriesField


def series(fun, T=2.0, n=401, initial=None):
    return TimeSeriesField.from_function(fun, np.linspace(0, T, n), initial)


def closed_ramp(t, h):
    return t - h * (1 - np.exp(-t / h))


def test_constant_is_fixed_point():
    v = series(lambda t: np.array([1.5, -2.0]))
    m = Mo.mollify(v, 0.3)
    np.testing.assert_allclose(m.values, v.values, atol=1e-15)


def test_ramp_closed_form():
    v = series(lambda t: t, T=1.0, n=11, initial=0.0)
    m = Mo.mollify(v, 0.5)
    assert abs(m.values[-1, 0] - (1 - 0.5 * (1 - np.exp(-2)))) <= 1e-12
    np.testing.assert_allclose(m.values[:, 0], closed_ramp(v.times, 0.5), atol=1e-12)
    # off-grid evaluation is exact for the linear interpolant
    np.testing.assert_allclose(Mo.evaluate(v, 0.5, [0.33, 0.77])[:, 0], closed_ramp(np.array([0.33, 0.77]), 0.5),
                               atol=1e-12)


def test_initial_value_exact():
    v = series(lambda t: np.sin(t) + 2.0, initial=np.array([0.7]))
    assert Mo.mollify(v, 0.2).values[0, 0] == 0.7


def test_ode_identity_sin():
    assert Mo.ode_residual(series(np.sin), 0.3) <= 1e-8


def test_time_derivative_ramp():
    v = series(lambda t: t, T=1.0, n=21, initial=0.0)
    d = Mo.mollify_time_derivative(v, 0.25)
    np.testing.assert_allclose(d.values[:, 0], 1 - np.exp(-v.times / 0.25), atol=1e-12)
    c = Mo.mollify_time_derivative(series(lambda t: 3.0), 0.25)
    assert np.all(c.values == 0.0)


def test_time_derivative_initial_mismatch():
    with pytest.raises(Mo.InitialMismatch):
        Mo.mollify_time_derivative(series(np.sin, initial=np.array([1.0])), 0.3)


def test_time_derivative_contraction_sin():
    v = series(np.sin, T=3.0, n=301)
    d = Mo.mollify_time_derivative(v, 0.4).values[:, 0]
    ref = np.cos(v.times)
    assert np.trapezoid(d**2, v.times) < np.trapezoid(ref**2, v.times)


def test_norm_bound_exponential_case():
    # v = 0, v_o != 0: lhs = ||e^{-t/h} v_o||_{L^2}, the bracket term equals it exactly
    vo = np.array([1.0, 2.0])
    v = TimeSeriesField(np.linspace(0, 1, 201), np.zeros((201, 2)), vo)
    h, t_o = 0.3, 1.0
    rep = Mo.mollifier_norm_check(v, h, 2, t_o)
    exact = np.sqrt(h / 2 * (1 - np.exp(-2 * t_o / h))) * np.linalg.norm(vo)
    assert abs(rep.lhs - exact) <= 1e-10
    assert abs(rep.rhs - exact) <= 1e-10


def test_norm_bound_contraction_without_initial():
    v = series(lambda t: np.array([np.sin(3 * t), t]), initial=np.zeros(2))
    rep = Mo.mollifier_norm_check(v, 0.2, 2, 2.0)
    assert rep.passed and rep.lhs <= rep.rhs


def test_norm_bound_infinity():
    vo = np.array([0.5])
    v = series(lambda t: np.cos(t), initial=vo)
    rep = Mo.mollifier_norm_check(v, 0.2, np.inf, 2.0)
    assert rep.rhs == pytest.approx(np.max(np.abs(np.cos(v.times))) + 0.5, abs=1e-12)
    assert rep.passed


@settings(max_examples=30, deadline=None)
@given(r=st.sampled_from([1.0, 2.0, np.inf]), h=st.floats(0.02, 1.0), t_o=st.floats(0.1, 2.0),
       a=st.floats(-3, 3), b=st.floats(-3, 3), vo=st.floats(-3, 3))
def test_norm_bound_property(r, h, t_o, a, b, vo):
    v = series(lambda t: np.array([a * np.sin(2 * t) + b]), initial=np.array([vo]), n=201)
    rep = Mo.mollifier_norm_check(v, h, r, t_o)
    assert rep.lhs <= rep.rhs + 1e-8


@settings(max_examples=30, deadline=None)
@given(al=st.floats(-5, 5), be=st.floats(-5, 5), h=st.floats(0.05, 2.0))
def test_linearity(al, be, h):
    u = series(lambda t: np.array([np.sin(t), t**2]), initial=np.array([0.3, -1.0]), n=51)
    v = series(lambda t: np.array([np.cos(2 * t), 1.0]), initial=np.array([1.0, 2.0]), n=51)
    w = TimeSeriesField(u.times, al * u.values + be * v.values, al * u.initial + be * v.initial)
    lhs = Mo.mollify(w, h).values
    rhs = al * Mo.mollify(u, h).values + be * Mo.mollify(v, h).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + abs(al) + abs(be)) * 10)


def test_first_order_convergence():
    t = np.linspace(0, 2, 4001)
    v = TimeSeriesField(t, np.sin(t)[:, None], np.array([0.0]))
    errs = []
    for h in (0.2, 0.1, 0.05, 0.025):
        m = Mo.mollify(v, h).values[:, 0]
        errs.append(np.sqrt(np.trapezoid((m - np.sin(t)) ** 2, t)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(np.abs(ratios - 2) <= 0.6)


def test_time_grid_validation():
    with pytest.raises(ValueError):
        TimeSeriesField(np.array([0.1, 0.2]), np.zeros((2, 1)), np.zeros(1))
