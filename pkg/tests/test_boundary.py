import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minmove import boundary as B, geometry as G

DISK = G.disk()
XO = np.array([-1.0, 0.0])


def sqrt_dist(x_o):
    g = lambda x, t: np.sqrt(np.linalg.norm(np.asarray(x, float) - x_o, axis=-1))
    return B.from_callables("sqrt_dist", g, lambda x, t: 0.0 * g(x, t), 1.0, DISK)


def paraboloid(p, T=1.0):
    p = np.asarray(p, float)
    g = lambda x, t: np.sum((np.asarray(x, float) - p) ** 2, axis=-1)
    return B.from_callables("paraboloid", g, lambda x, t: 0.0 * g(x, t), T, DISK,
                            grad_g=lambda x, t: 2 * (np.asarray(x, float) - p))


def brute_slopes(g, x_o, t, pts, box=4.0, n=401):
    """Feasible lower and upper supporting slopes on a grid over [-box, box]^2."""
    d = pts - x_o
    dg = g.g(pts, t) - float(g.g(x_o, t))
    w1, w2 = np.meshgrid(np.linspace(-box, box, n), np.linspace(-box, box, n), indexing="ij")
    W = np.stack([w1, w2], -1).reshape(-1, 2)
    lower_ok = np.all(W @ d.T <= dg[None] + 1e-9, axis=1)
    upper_ok = np.all(W @ d.T >= dg[None] - 1e-9, axis=1)
    return W[lower_ok], W[upper_ok]


def test_rotating_affine_certificate():
    data = B.rotating_affine(np.pi)
    cert = B.certify_tbsc(data, DISK, XO)
    exact = np.column_stack([np.cos(cert.times), np.sin(cert.times)])
    np.testing.assert_allclose(cert.w_minus_samples, exact, atol=1e-6)
    np.testing.assert_allclose(cert.w_plus_samples, exact, atol=1e-6)
    assert abs(cert.Q - 1.0) <= 1e-6
    assert abs(cert.Qdot - 1.0) <= 1e-6


def test_zero_datum_certificate():
    cert = B.certify_tbsc(B.constant(0.0, 1.0), DISK, XO)
    assert cert.Q == 0.0
    wc = B.widen_slopes(cert, B.constant(0.0, 1.0), DISK)
    np.testing.assert_array_equal(wc.widened_minus(0.3), [0.0, 0.0])
    np.testing.assert_array_equal(wc.widened_plus(0.3), [0.0, 0.0])


def test_paraboloid_certificate_against_grid():
    data = paraboloid([0.3, 0.5])
    cert = B.certify_tbsc(data, DISK, XO, time_samples=2)
    lo, up = brute_slopes(data, XO, 0.0, cert.boundary_points[::8])
    # the certified slopes lie in the brute-force feasible sets, to grid resolution
    for w, feas in ((cert.w_minus_samples[0], lo), (cert.w_plus_samples[0], up)):
        assert len(feas) and np.min(np.linalg.norm(feas - w, axis=1)) <= 2 * 8 / 400
    # on the unit circle the datum is affine, so both slopes are -2p
    np.testing.assert_allclose(cert.w_minus_samples[0], [-0.6, -1.0], atol=1e-6)


def test_negative_square_is_bsc_on_circle():
    # -|x - x_o|^2 = 2 x_o.x - 2 on the unit circle: affine there, slope 2 x_o
    g = lambda x, t: -np.sum((np.asarray(x, float) - XO) ** 2, axis=-1)
    data = B.from_callables("neg_sq", g, lambda x, t: 0.0 * g(x, t), 1.0, DISK)
    cert = B.certify_tbsc(data, DISK, XO, time_samples=3)
    np.testing.assert_allclose(cert.w_minus_samples, np.tile(2 * XO, (3, 1)), atol=1e-6)


def test_non_bsc_datum_rejected():
    with pytest.raises(B.Infeasible) as exc:
        B.certify_tbsc(sqrt_dist(XO), DISK, XO, time_samples=3)
    # sqrt|d| >= 0 leaves w = 0 below, but an upper slope must grow like |d|^(-1/2)
    assert exc.value.side == "upper"


def test_widening_interior_oracle():
    # 1 - |x|^2: concave, boundary slope alone fails from above in the interior
    g = lambda x, t: 1.0 - np.sum(np.asarray(x, float) ** 2, axis=-1)
    data = B.from_callables("cap", g, lambda x, t: 0.0 * g(x, t), 1.0, DISK,
                            grad_g=lambda x, t: -2 * np.asarray(x, float))
    cert = B.widen_slopes(B.certify_tbsc(data, DISK, XO, time_samples=3), data, DISK)
    rng = np.random.default_rng(0)
    r, th = np.sqrt(rng.uniform(0, 1, 4000)), rng.uniform(0, 2 * np.pi, 4000)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    d = pts - XO
    for t in (0.0, 0.5, 1.0):
        gx = data.g(pts, t)
        assert np.all(data.g(XO, t) + d @ cert.widened_minus(t) <= gx + 1e-9)
        assert np.all(gx <= data.g(XO, t) + d @ cert.widened_plus(t) + 1e-9)
    assert cert.Q1 <= cert.Q + data.grad_g_sup + 1e-12
    for t in cert.times:
        assert np.linalg.norm(cert.widened_plus(t)) <= cert.Q1 + 1e-9
        assert np.linalg.norm(cert.widened_minus(t)) <= cert.Q1 + 1e-9


def test_rotating_affine_needs_no_widening():
    data = B.rotating_affine(np.pi)
    cert = B.widen_slopes(B.certify_tbsc(data, DISK, XO), data, DISK)
    assert cert.widening == (0.0, 0.0)
    assert cert.Q1 == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(theta=st.floats(0, 2 * np.pi), T=st.floats(0.5, 3.0))
def test_certificate_soundness(theta, T):
    data = B.rotating_affine(T)
    x_o = DISK.boundary(np.array([theta]))[0]
    cert = B.widen_slopes(B.certify_tbsc(data, DISK, x_o, time_samples=16), data, DISK)
    pts = DISK.sample_points(8, 48)
    d = pts - x_o
    for t in np.linspace(0, T, 9):
        gx, go = data.g(pts, t), float(data.g(x_o, t))
        assert np.max(go + d @ cert.w_minus(t) - gx) <= 1e-9
        assert np.max(gx - go - d @ cert.w_plus(t)) <= 1e-9
    # widening adds a constant vector: time derivatives are unchanged
    for t in np.linspace(0, T, 5):
        np.testing.assert_allclose(cert.widened_minus(t) - cert.w_minus(t), cert.widened_minus(0) - cert.w_minus(0))
    # difference quotients bounded by Qdot
    q = np.linalg.norm(np.diff(cert.w_minus_samples, axis=0), axis=1) / np.diff(cert.times)
    assert np.all(q <= cert.Qdot + 1e-9)


def test_datum_gradient_bound():
    data = B.rotating_affine(np.pi)
    rng = np.random.default_rng(1)
    a, b = rng.uniform(-0.7, 0.7, (2, 300, 2))
    t = rng.uniform(0, np.pi, 300)
    q = np.abs(data.g(a, t) - data.g(b, t)) / np.linalg.norm(a - b, axis=1)
    assert np.all(q <= data.grad_g_sup + 1e-12)
    np.testing.assert_array_equal(data.g0(a), data.g(a, 0.0))


def test_time_smooth_constant_in_time():
    data = B.affine([1.0, -2.0], 0.5, T=2.0)
    sm = B.time_smooth_boundary(data, 0.3)
    x = np.array([[0.2, 0.1], [-0.4, 0.5]])
    for t in (0.0, 0.7, 2.0):
        np.testing.assert_allclose(sm.g(x, t), data.g(x, t), atol=1e-13)


def test_time_smooth_linear_in_time():
    g = lambda x, t: t + 0.0 * np.asarray(x, float)[..., 0]
    data = B.from_callables("ramp", g, lambda x, t: 1.0 + 0.0 * g(x, t), 2.0, DISK)
    h = 0.4
    sm = B.time_smooth_boundary(data, h)
    x = np.array([[0.1, 0.2]])
    for t in (0.0, 0.3, 1.0, 2.0):
        assert abs(sm.g(x, t)[0] - (t - h * (1 - np.exp(-t / h)))) <= 1e-12


def test_time_smooth_converges_for_rotating_data():
    data = B.rotating_affine(np.pi)
    x = DISK.sample_points(3, 8)
    errs = []
    for h in (0.4, 0.2, 0.1, 0.05):
        sm = B.time_smooth_boundary(data, h)
        errs.append(max(np.max(np.abs(sm.g(x, t) - data.g(x, t))) for t in np.linspace(0, np.pi, 17)))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    sm = B.time_smooth_boundary(data, 0.2)
    np.testing.assert_array_equal(sm.g(x, 0.0), data.g(x, 0.0))


def test_time_smooth_derivative_contraction():
    data = B.rotating_affine(np.pi)
    sm = B.time_smooth_boundary(data, 0.3)
    x = np.array([[0.5, -0.3]])
    ts = np.linspace(0, np.pi, 201)
    a = np.array([sm.dt_g(x, t)[0] for t in ts])
    b = np.array([data.dt_g(x, t)[0] for t in ts])
    assert np.trapezoid(a**2, ts) <= np.trapezoid(b**2, ts)


def test_by_name_unknown_kind():
    with pytest.raises(ValueError):
        B.by_name("wave", DISK, 1.0)
