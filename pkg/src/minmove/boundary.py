"""Time-dependent Dirichlet data, slope certificates and data regularization.

A slope certificate at a boundary point x_o consists of affine functions
g(x_o,t) + w(t).(x - x_o) that bound the data from below and above along the
boundary.  Per time slice the admissible slopes form a polygon; we return the
point of that polygon closest to the least-squares slope of the boundary data.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection

from .geometry import ConvexDomain

Array = np.ndarray


class Infeasible(RuntimeError):
    def __init__(self, t, side, msg=""):
        self.t, self.side = t, side
        super().__init__(f"no bounded {side} slope at t={t:.6g}: {msg}")


class WideningInsufficient(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class BoundaryDatum:
    name: str
    g: Callable[[Array, float], Array]
    dt_g: Callable[[Array, float], Array]
    T: float
    grad_g_sup: float
    dt_g_sup: float
    grad_g: Optional[Callable[[Array, float], Array]] = None
    dt_grad_g: Optional[Callable[[Array, float], Array]] = None
    dt_grad_g_sup: Optional[float] = None
    # for data affine in x: t -> slope vector and its time derivative
    spatial_slope: Optional[Callable[[float], Array]] = None
    spatial_slope_dt: Optional[Callable[[float], Array]] = None
    params: dict = field(default_factory=dict)

    def g0(self, x):
        return self.g(x, 0.0)

    def gradient(self, x, t, step=1e-6):
        if self.grad_g is not None:
            return self.grad_g(x, t)
        return _fd_space_grad(lambda y: self.g(y, t), x, step)

    def dt_gradient(self, x, t, step=1e-6):
        if self.dt_grad_g is not None:
            return self.dt_grad_g(x, t)
        return _fd_space_grad(lambda y: self.dt_g(y, t), x, step)


def _fd_space_grad(fun, x, step):
    x = np.asarray(x, float)
    out = np.empty(x.shape)
    for k in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[k] = step
        out[..., k] = (fun(x + e) - fun(x - e)) / (2 * step)
    return out


def estimate_sups(g, dt_g, T, dom: ConvexDomain, grad_g=None, dt_grad_g=None,
                  n_times=33, n_radial=12, n_angular=64):
    """Sampled sup norms of grad g, dt g and dt grad g over the closure x [0, T]."""
    pts = dom.sample_points(n_radial, n_angular)
    gs, ds, dgs = 0.0, 0.0, 0.0
    for t in np.linspace(0.0, T, n_times):
        gr = grad_g(pts, t) if grad_g is not None else _fd_space_grad(lambda y: g(y, t), pts, 1e-6)
        dgr = dt_grad_g(pts, t) if dt_grad_g is not None else _fd_space_grad(lambda y: dt_g(y, t), pts, 1e-6)
        gs = max(gs, float(np.max(np.linalg.norm(gr, axis=-1))))
        ds = max(ds, float(np.max(np.abs(dt_g(pts, t)))))
        dgs = max(dgs, float(np.max(np.linalg.norm(dgr, axis=-1))))
    return gs, ds, dgs


# ---------------------------------------------------------------- catalog

def rotating_affine(T: float = np.pi, radius: float = 1.0) -> BoundaryDatum:
    """g = x1 cos t + x2 sin t; radius bounds |x| on the domain (for dt g)."""
    a = lambda t: np.array([np.cos(t), np.sin(t)])
    da = lambda t: np.array([-np.sin(t), np.cos(t)])

    def g(x, t):
        x = np.asarray(x, float)
        return x[..., 0] * np.cos(t) + x[..., 1] * np.sin(t)

    def dt_g(x, t):
        x = np.asarray(x, float)
        return -x[..., 0] * np.sin(t) + x[..., 1] * np.cos(t)

    return BoundaryDatum(
        name="rotating_affine", g=g, dt_g=dt_g, T=float(T), grad_g_sup=1.0, dt_g_sup=float(radius),
        grad_g=lambda x, t: np.broadcast_to(a(t), np.shape(x)).copy(),
        dt_grad_g=lambda x, t: np.broadcast_to(da(t), np.shape(x)).copy(),
        dt_grad_g_sup=1.0, spatial_slope=a, spatial_slope_dt=da,
    )


def affine(slope, offset: float = 0.0, T: float = 1.0) -> BoundaryDatum:
    """Stationary affine data slope.x + offset."""
    a = np.asarray(slope, float)
    zero = np.zeros_like(a)
    return BoundaryDatum(
        name="affine", g=lambda x, t: np.asarray(x, float) @ a + offset,
        dt_g=lambda x, t: np.zeros(np.shape(x)[:-1]), T=float(T),
        grad_g_sup=float(np.linalg.norm(a)), dt_g_sup=0.0,
        grad_g=lambda x, t: np.broadcast_to(a, np.shape(x)).copy(),
        dt_grad_g=lambda x, t: np.zeros(np.shape(x)), dt_grad_g_sup=0.0,
        spatial_slope=lambda t: a.copy(), spatial_slope_dt=lambda t: zero.copy(),
    )


def constant(value: float = 0.0, T: float = 1.0) -> BoundaryDatum:
    return replace(affine((0.0, 0.0), value, T), name="constant")


def fourier(terms, T: float, center=(0.0, 0.0), radius: float = 1.0, dom: ConvexDomain | None = None) -> BoundaryDatum:
    """Harmonic extension of truncated Fourier data in (theta, t).

    Each term (k, m, A, B, C, D) contributes
    (r/radius)^k [A cos k th cos m t + B cos k th sin m t + C sin k th cos m t + D sin k th sin m t]
    in polar coordinates about center.  Written via Re/Im of ((x-c)/radius)^k so it is smooth.
    """
    c = np.asarray(center, float)
    terms = [tuple(float(v) for v in term) for term in terms]

    def parts(x, k):
        z = ((x[..., 0] - c[0]) + 1j * (x[..., 1] - c[1])) / radius
        zk = z ** int(k)
        dzk = int(k) * z ** (int(k) - 1) / radius if k > 0 else 0 * z
        return zk.real, zk.imag, dzk

    def g(x, t):
        x = np.asarray(x, float)
        out = np.zeros(x.shape[:-1])
        for k, m, A, B, C, D in terms:
            re, im, _ = parts(x, k)
            out += re * (A * np.cos(m * t) + B * np.sin(m * t)) + im * (C * np.cos(m * t) + D * np.sin(m * t))
        return out

    def dt_g(x, t):
        x = np.asarray(x, float)
        out = np.zeros(x.shape[:-1])
        for k, m, A, B, C, D in terms:
            re, im, _ = parts(x, k)
            out += m * (re * (-A * np.sin(m * t) + B * np.cos(m * t)) + im * (-C * np.sin(m * t) + D * np.cos(m * t)))
        return out

    def _grad(x, t, deriv):
        x = np.asarray(x, float)
        out = np.zeros(x.shape)
        for k, m, A, B, C, D in terms:
            _, _, dz = parts(x, k)
            if deriv:
                p = m * (-A * np.sin(m * t) + B * np.cos(m * t))
                q = m * (-C * np.sin(m * t) + D * np.cos(m * t))
            else:
                p = A * np.cos(m * t) + B * np.sin(m * t)
                q = C * np.cos(m * t) + D * np.sin(m * t)
            # d/dx1 z^k = dz, d/dx2 z^k = i dz
            out[..., 0] += p * dz.real + q * dz.imag
            out[..., 1] += -p * dz.imag + q * dz.real
        return out

    grad = lambda x, t: _grad(x, t, False)
    dgrad = lambda x, t: _grad(x, t, True)
    if dom is None:
        from .geometry import disk
        dom = disk(radius, center)
    gs, ds, dgs = estimate_sups(g, dt_g, T, dom, grad, dgrad)
    return BoundaryDatum("fourier", g, dt_g, float(T), gs, ds, grad, dgrad, dgs, params={"terms": terms})


def from_callables(name, g, dt_g, T, dom: ConvexDomain, grad_g=None, dt_grad_g=None) -> BoundaryDatum:
    gs, ds, dgs = estimate_sups(g, dt_g, T, dom, grad_g, dt_grad_g)
    return BoundaryDatum(name, g, dt_g, float(T), gs, ds, grad_g, dt_grad_g, dgs)


def shifted(datum: BoundaryDatum, shift: float) -> BoundaryDatum:
    return replace(datum, name=f"{datum.name}+{shift:g}", g=lambda x, t: datum.g(x, t) + shift)


def by_name(kind: str, dom: ConvexDomain, T: float, **params) -> BoundaryDatum:
    if kind == "rotating_affine":
        rad = float(np.max(np.linalg.norm(dom.boundary(np.linspace(0, 2 * np.pi, 721)), axis=-1)))
        return rotating_affine(T, rad)
    if kind == "constant":
        return constant(float(params.get("value", 0.0)), T)
    if kind == "affine":
        return affine(params["slope"], float(params.get("offset", 0.0)), T)
    if kind == "fourier":
        return fourier(params["terms"], T, dom.center, 0.5 * dom.diam, dom)
    raise ValueError(f"unknown datum kind {kind!r}")


# ----------------------------------------------------------- certificates

@dataclass(frozen=True, eq=False)
class SlopeCertificate:
    x_o: Array
    nu: Array
    times: Array
    w_minus_samples: Array
    w_plus_samples: Array
    Q: float
    Qdot: float
    boundary_points: Array
    ls_slopes: Array
    analytic: Optional[tuple] = None        # (w_minus, w_plus, dw_minus, dw_plus) callables
    widening: Optional[tuple] = None        # (Q_o for minus side, Q_o for plus side)
    Q1: Optional[float] = None

    def _spline(self, which):
        data = self.w_minus_samples if which == "minus" else self.w_plus_samples
        if len(self.times) < 2:
            return None
        return CubicSpline(self.times, data, axis=0)

    def w_minus(self, t):
        if self.analytic is not None:
            return np.asarray(self.analytic[0](t), float)
        return self._spline("minus")(t)

    def w_plus(self, t):
        if self.analytic is not None:
            return np.asarray(self.analytic[1](t), float)
        return self._spline("plus")(t)

    def dw_minus(self, t):
        if self.analytic is not None:
            return np.asarray(self.analytic[2](t), float)
        return self._spline("minus")(t, 1)

    def dw_plus(self, t):
        if self.analytic is not None:
            return np.asarray(self.analytic[3](t), float)
        return self._spline("plus")(t, 1)

    @property
    def has_analytic_derivative(self) -> bool:
        return self.analytic is not None

    def widened_minus(self, t):
        if self.widening is None:
            raise ValueError("certificate has not been widened")
        return self.w_minus(t) + self.widening[0] * self.nu

    def widened_plus(self, t):
        if self.widening is None:
            raise ValueError("certificate has not been widened")
        return self.w_plus(t) - self.widening[1] * self.nu

    def table(self):
        """Rows (t, w-_1, w-_2, w+_1, w+_2, max(|w-|,|w+|))."""
        q = np.maximum(np.linalg.norm(self.w_minus_samples, axis=1), np.linalg.norm(self.w_plus_samples, axis=1))
        return np.column_stack([self.times, self.w_minus_samples, self.w_plus_samples, q])


def _project_polytope(D, c, w_ref, box, t, side):
    """Point of {w : D w >= c, |w_k| <= box} closest to w_ref (n = 2)."""
    scale = np.linalg.norm(D, axis=1)
    keep = scale > 0
    D, c = D[keep] / scale[keep, None], c[keep] / scale[keep]
    tol = 1e-12 * (1.0 + np.max(np.abs(c), initial=0.0) + np.linalg.norm(w_ref))
    if np.all(D @ w_ref - c >= -tol) and np.max(np.abs(w_ref)) < box:
        return w_ref.copy()
    n = D.shape[1]
    B = np.vstack([np.eye(n), -np.eye(n)])
    A = np.vstack([D, B * -1.0])          # rows: D w >= c and -w_k >= -box, w_k >= -box
    b = np.concatenate([c, -box * np.ones(2 * n)])
    # Chebyshev centre: maximize s with A w - s >= b
    res = linprog(np.r_[np.zeros(n), -1.0], A_ub=np.hstack([-A, np.ones((len(A), 1))]), b_ub=-b,
                  bounds=[(None, None)] * n + [(None, box)], method="highs")
    if res.status != 0 or -res.fun < -tol:
        raise Infeasible(t, side, f"constraints inconsistent within slope box {box:g}")
    centre, radius = res.x[:n], -res.fun
    if radius <= 1e-10:
        return centre
    hs = HalfspaceIntersection(np.hstack([-A, b[:, None]]), centre)
    verts = hs.intersections
    ang = np.arctan2(*(verts - verts.mean(0)).T[::-1])
    verts = verts[np.argsort(ang)]
    best, best_d = None, np.inf
    for k in range(len(verts)):
        p, q = verts[k], verts[(k + 1) % len(verts)]
        e = q - p
        s = np.clip((w_ref - p) @ e / max(e @ e, 1e-300), 0.0, 1.0)
        cand = p + s * e
        d = np.linalg.norm(cand - w_ref)
        if d < best_d:
            best, best_d = cand, d
    return best


def _certify_slices(g, x_o, times, pts, max_slope):
    d = pts - x_o
    far = np.linalg.norm(d, axis=1) > 1e-12
    d, P = d[far], pts[far]
    X = np.column_stack([np.ones(len(pts)), pts - x_o])
    wm, wp, wls = [], [], []
    for t in times:
        gx = g.g(P, t)
        go = float(g.g(x_o, t))
        b = gx - go
        coef = np.linalg.lstsq(X, g.g(pts, t), rcond=None)[0]
        w_ref = coef[1:]
        wls.append(w_ref)
        wl = _project_polytope(-d, -b, w_ref, max_slope, t, "lower")
        wu = _project_polytope(d, b, w_ref, max_slope, t, "upper")
        for w, side in ((wl, "lower"), (wu, "upper")):
            if np.max(np.abs(w)) >= max_slope * (1 - 1e-9):
                raise Infeasible(t, side, f"slope reaches the bound {max_slope:g}")
        wm.append(wl)
        wp.append(wu)
    return np.array(wm), np.array(wp), np.array(wls)


def certify_tbsc(g: BoundaryDatum, dom: ConvexDomain, x_o, time_samples: int = 64,
                 boundary_samples: int = 256, max_slope: float = 1e3, refine: int = 4,
                 growth_tol: float = 0.25) -> SlopeCertificate:
    """Lower/upper supporting slopes at x_o on a time grid.

    Boundedness is tested by refinement: the slopes are recomputed with
    refine x boundary_samples points and the certificate is rejected when the
    largest slope norm grows by more than growth_tol (relative), which is what
    happens when the supporting slope blows up near x_o.
    """
    x_o = np.asarray(x_o, float)
    nu = dom.normal(x_o)
    times = np.linspace(0.0, g.T, time_samples)
    theta0 = float(dom.param_of(x_o))

    def pts_for(n):
        th = theta0 + 2 * np.pi * np.arange(n) / n
        return dom.boundary(th)

    wm, wp, wls = _certify_slices(g, x_o, times, pts_for(boundary_samples), max_slope)
    pts = pts_for(boundary_samples)
    if refine and refine > 1:
        pts_f = pts_for(boundary_samples * refine)
        wm_f, wp_f, wls_f = _certify_slices(g, x_o, times, pts_f, max_slope)
        for coarse, fine, side in ((wm, wm_f, "lower"), (wp, wp_f, "upper")):
            qc = np.linalg.norm(coarse, axis=1)
            qf = np.linalg.norm(fine, axis=1)
            grow = qf - qc
            k = int(np.argmax(grow))
            if grow[k] > growth_tol * max(qc[k], 1e-12) and grow[k] > 1e-6:
                raise Infeasible(times[k], side,
                                 f"slope norm grows from {qc[k]:.4g} to {qf[k]:.4g} under boundary refinement")
        wm, wp, wls, pts = wm_f, wp_f, wls_f, pts_f

    Q = float(max(np.linalg.norm(wm, axis=1).max(), np.linalg.norm(wp, axis=1).max()))
    analytic = None
    if g.spatial_slope is not None:
        exact = np.array([g.spatial_slope(t) for t in times])
        if np.allclose(exact, wm, atol=1e-9) and np.allclose(exact, wp, atol=1e-9):
            a, da = g.spatial_slope, g.spatial_slope_dt
            analytic = (a, a, da, da)
    Qdot = 0.0
    if len(times) > 1:
        dt = np.diff(times)
        for w in (wm, wp):
            Qdot = max(Qdot, float(np.max(np.linalg.norm(np.diff(w, axis=0), axis=1) / dt)))
    cert = SlopeCertificate(x_o, nu, times, wm, wp, Q, Qdot, pts, wls, analytic)
    if analytic is not None:
        dq = max(np.max(np.linalg.norm([analytic[2](t) for t in times], axis=-1)), Qdot)
        cert = replace(cert, Qdot=float(dq))
    return cert


def widen_slopes(cert: SlopeCertificate, g: BoundaryDatum, dom: ConvexDomain,
                 n_radial: int = 12, n_angular: int = 64, tol: float = 1e-9) -> SlopeCertificate:
    """Slopes whose affine functions bound g on the whole closure.

    Each side first tries the boundary slopes unchanged; if an interior sample
    violates the bound it shifts by grad_g_sup along the normal."""
    pts = dom.sample_points(n_radial, n_angular)
    d = pts - cert.x_o
    nu = cert.nu

    def ok(Qo, side):
        worst = -np.inf
        for t in cert.times:
            go = float(g.g(cert.x_o, t))
            gx = g.g(pts, t)
            if side == "minus":
                w = cert.w_minus(t) + Qo * nu
                worst = max(worst, float(np.max(go + d @ w - gx)))
            else:
                w = cert.w_plus(t) - Qo * nu
                worst = max(worst, float(np.max(gx - go - d @ w)))
        return worst <= tol, worst

    widening = []
    for side in ("minus", "plus"):
        good, _ = ok(0.0, side)
        if good:
            widening.append(0.0)
            continue
        Qo = float(g.grad_g_sup)
        good, worst = ok(Qo, side)
        if not good:
            raise WideningInsufficient(f"{side} side still violated by {worst:.3e} after widening by {Qo:g}")
        widening.append(Qo)
    return replace(cert, widening=tuple(widening), Q1=float(cert.Q + max(widening)))


# ----------------------------------------------------- data regularization

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _kernel_integral(fun, t, h):
    """(1/h) int_0^t exp((s-t)/h) fun(s) ds with composite Gauss-Legendre."""
    if t <= 0:
        return 0.0
    panels = max(1, 8 * int(np.ceil(t / h)))
    edges = np.linspace(0.0, t, panels + 1)
    acc = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        s = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
        w = 0.5 * (b - a) * _GL_WEIGHTS * np.exp((s - t) / h) / h
        for sk, wk in zip(s, w):
            acc = acc + wk * fun(sk)
    return acc


def time_smooth_boundary(g: BoundaryDatum, h: float) -> BoundaryDatum:
    """Exponentially mollified data g_h(t) = e^{-t/h} g_o + (1/h) int_0^t e^{(s-t)/h} g(s) ds."""
    if not (0 < h <= g.T):
        raise ValueError("h must lie in (0, T]")

    def gh(x, t):
        x = np.asarray(x, float)
        return np.exp(-t / h) * g.g(x, 0.0) + _kernel_integral(lambda s: g.g(x, s), t, h)

    def dt_gh(x, t):
        return (g.g(x, t) - gh(x, t)) / h

    grad = None
    if g.grad_g is not None:
        grad = lambda x, t: np.exp(-t / h) * g.grad_g(x, 0.0) + _kernel_integral(lambda s: g.grad_g(x, s), t, h)
    return BoundaryDatum(
        name=f"{g.name}@h={h:g}", g=gh, dt_g=dt_gh, T=g.T, grad_g_sup=g.grad_g_sup, dt_g_sup=g.dt_g_sup,
        grad_g=grad, dt_grad_g_sup=g.dt_grad_g_sup, params={"h": h, "base": g.name},
    )
