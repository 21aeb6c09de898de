import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minmove import barrier as Bar, boundary as B, geometry as G, integrand as I

DISK = G.disk()
XO = np.array([-1.0, 0.0])
QUAD = I.quadratic()


@pytest.fixture(scope="module")
def rot():
    data = B.rotating_affine(np.pi)
    cert = B.widen_slopes(B.certify_tbsc(data, DISK, XO), data, DISK)
    return data, cert


def closed_y(alpha, t):
    return (2 / alpha) * np.array([1 - np.cos(t), -np.sin(t)])


def closed_c(alpha, t):
    return alpha / 4 + 1 + (2 / alpha) * (1 - np.cos(t))


@pytest.mark.parametrize("alpha", [1.0, 2.0, 5.0])
def test_explicit_barrier_matches_closed_forms(rot, alpha):
    data, cert = rot
    b = Bar.explicit_disk_barrier(QUAD, DISK, data, cert, alpha)
    for t in np.linspace(0, np.pi, 17):
        np.testing.assert_allclose(b.y(t), closed_y(alpha, t), atol=1e-6)
        assert abs(b.c(t) - closed_c(alpha, t)) <= 1e-6
        x = np.array([[0.3, -0.2], [-1.0, 0.0]])
        closed = 0.5 * (alpha / 2) * np.sum((x - closed_y(alpha, t)) ** 2, 1) - closed_c(alpha, t)
        np.testing.assert_allclose(b.eval(x, t), closed, atol=1e-6)


def test_pinned_value_at_start(rot):
    data, cert = rot
    b = Bar.explicit_disk_barrier(QUAD, DISK, data, cert, 2.0)
    assert abs(b.eval(XO, 0.0) - (-1.0)) <= 1e-12
    np.testing.assert_allclose(b.grad(XO[None], 0.0)[0], cert.widened_minus(0.0) + b.lam * cert.nu, atol=1e-9)


def test_explicit_barrier_verification(rot):
    data, cert = rot
    b = Bar.explicit_disk_barrier(QUAD, DISK, data, cert, 2.0)
    rep = Bar.verify(b, QUAD, DISK, data)
    assert rep.pin_err <= 1e-12
    assert rep.ordering_viol <= 1e-10
    assert rep.divergence_err <= 1e-6
    assert rep.subsol_viol <= 1e-10
    assert rep.lip_const <= 3.0 + 1e-12
    assert rep.lip_const <= rep.lip_budget + 1e-8


def test_below_threshold_alpha_fails(rot):
    data, cert = rot
    rep = Bar.verify(Bar.explicit_disk_barrier(QUAD, DISK, data, cert, 0.5), QUAD, DISK, data)
    assert rep.subsol_viol > 0.4
    # pinning and ordering do not depend on alpha
    assert rep.pin_err <= 1e-12 and rep.ordering_viol <= 1e-10


@settings(max_examples=10, deadline=None)
@given(alpha=st.floats(1.0, 8.0))
def test_subsolution_for_alpha_at_least_one(rot, alpha):
    data, cert = rot
    rep = Bar.verify(Bar.explicit_disk_barrier(QUAD, DISK, data, cert, alpha), QUAD, DISK, data,
                     space_samples=24, time_samples=24)
    assert rep.subsol_viol <= 1e-8
    assert rep.ordering_viol <= 1e-10
    assert rep.lip_const <= 2 + alpha / 2 + 1e-9


def test_upper_barrier(rot):
    data, cert = rot
    b = Bar.explicit_disk_barrier(QUAD, DISK, data, cert, -2.0)
    assert b.sign == "upper"
    rep = Bar.verify(b, QUAD, DISK, data)
    assert rep.pin_err <= 1e-12
    assert rep.ordering_viol <= 1e-10
    assert rep.subsol_viol <= 1e-8
    pts = DISK.sample_points(8, 32)
    for t in np.linspace(0, np.pi, 9):
        assert np.all(b.eval(pts, t) >= data.g(pts, t) - 1e-10)


def test_sign_alpha_mismatch(rot):
    data, cert = rot
    with pytest.raises(ValueError):
        Bar.build(QUAD, DISK, data, cert, 2.0, sign="upper", lam=2.0)
    with pytest.raises(ValueError):
        Bar.build(QUAD, DISK, data, cert, 0.0, lam=2.0)


@settings(max_examples=8, deadline=None)
@given(alpha=st.floats(1.0, 50.0), t=st.floats(0.0, np.pi))
def test_sublevel_set_is_closed_form_ball(rot, alpha, t):
    data, cert = rot
    b = Bar.explicit_disk_barrier(QUAD, DISK, data, cert, alpha)
    centre, radius = np.array([2 / alpha, 0.0]), 1 + 2 / alpha
    _, pts = Bar.sublevel_boundary(b, DISK, t, n=64)
    np.testing.assert_allclose(np.linalg.norm(pts - centre, axis=1), radius, atol=1e-9)
    rep = Bar.sublevel_geometry(b, DISK, t)
    assert rep.x_o_on_boundary and rep.omega_contained


def test_sublevel_points_satisfy_equality(rot):
    data, cert = rot
    b = Bar.explicit_disk_barrier(QUAD, DISK, data, cert, 2.0)
    th = 2 * np.pi * np.arange(256) / 256
    ball = np.array([1.0, 0.0]) + 2 * np.column_stack([np.cos(th), np.sin(th)])
    for t in np.linspace(0, np.pi, 9):
        assert np.max(np.abs(Bar.sublevel_function(b, ball, t))) <= 1e-9


def test_curvature_of_sampled_circle():
    th = 2 * np.pi * np.arange(400) / 400
    for r in (0.5, 2.0):
        k = Bar.curvature_samples(r * np.column_stack([np.cos(th), np.sin(th)]))
        np.testing.assert_allclose(k, 1 / r, rtol=1e-4)


def test_sublevel_boundary_curvature_bound(rot):
    # the sublevel set is a ball of radius 1 + 2/alpha >= R = 1
    data, cert = rot
    b = Bar.explicit_disk_barrier(QUAD, DISK, data, cert, 2.0)
    _, pts = Bar.sublevel_boundary(b, DISK, 0.7, n=256)
    np.testing.assert_allclose(Bar.curvature_samples(pts), 0.5, rtol=1e-3)


def test_alpha_min_examples(rot):
    data, cert = rot
    assert Bar.alpha_min(QUAD, DISK, data, cert) == pytest.approx(3.0, abs=1e-6)
    static = B.affine([0.4, -0.2], 0.1, T=1.0)
    sc = B.widen_slopes(B.certify_tbsc(static, DISK, XO, time_samples=4), static, DISK)
    assert sc.Qdot == 0
    assert Bar.alpha_min(QUAD, DISK, static, sc) == 2.0
    # static slopes remove the infinite Hessian term of the quartic
    assert Bar.alpha_min(I.quartic(), DISK, static, sc) == 2.0
    assert Bar.alpha_min(I.quartic(), DISK, data, cert) == np.inf


def test_alpha_min_linear_in_diameter(rot):
    data, cert = rot
    big = dataclasses.replace(DISK, diam=2 * DISK.diam)
    a1 = Bar.alpha_min(QUAD, DISK, data, cert) - data.dt_g_sup
    a2 = Bar.alpha_min(QUAD, big, data, cert) - data.dt_g_sup
    assert a2 == pytest.approx(2 * a1, rel=1e-12)


@pytest.mark.parametrize("alpha,gamma", [(2.0, 5.625), (3.0, 7.1875)])
def test_parameter_sweeps(rot, alpha, gamma):
    data, cert = rot
    p = Bar.select_parameters(QUAD, DISK, data, cert, alpha)
    # |grad f*(eta)| = |eta| > R/eps + Q1 = 2 first holds on the grid 2 * 1.25^k at k = 1
    assert p.M == pytest.approx(2.5, rel=1e-12)
    # radial maximum of (alpha/4)|x|^2 + Q1|x| on the M-ball
    assert p.Gamma == pytest.approx(gamma, rel=1e-12)
    assert p.rho0 >= p.M
    assert p.lam > cert.Q1 + 1.0
    b = Bar.build(QUAD, DISK, data, cert, alpha, params=p)
    for t in np.linspace(0, np.pi, 33):
        z = np.linalg.norm(b.z_lambda(t))
        assert z >= p.rho0 - 1e-12
        assert z == pytest.approx((2 / alpha) * np.sqrt(p.lam**2 - 2 * p.lam * np.cos(t) + 1), rel=1e-6)


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_general_pipeline_at_alpha_min(rot, sign):
    data, cert = rot
    a0 = Bar.alpha_min(QUAD, DISK, data, cert)
    b = Bar.build(QUAD, DISK, data, cert, sign * a0)
    rep = Bar.verify(b, QUAD, DISK, data, Qdot=cert.Qdot)
    assert rep.pin_err <= 1e-10
    assert rep.ordering_viol <= 1e-9
    assert rep.subsol_viol <= 1e-8
    assert rep.lip_const <= rep.lip_budget + 1e-8
    assert rep.divergence_err <= 1e-6


def test_quartic_barrier_for_static_data():
    data = B.affine([0.4, -0.2], 0.1, T=1.0)
    f = I.quartic()
    cert = B.widen_slopes(B.certify_tbsc(data, DISK, XO, time_samples=4), data, DISK)
    a0 = Bar.alpha_min(f, DISK, data, cert)
    b = Bar.build(f, DISK, data, cert, a0)
    rep = Bar.verify(b, f, DISK, data, space_samples=32, time_samples=8, Qdot=cert.Qdot)
    assert rep.pin_err <= 1e-10
    assert rep.ordering_viol <= 1e-9
    assert rep.subsol_viol <= 1e-6
    assert rep.divergence_err <= 1e-4 * a0
    assert rep.lip_const <= rep.lip_budget + 1e-8
