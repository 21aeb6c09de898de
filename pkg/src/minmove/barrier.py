"""Conjugate-based barriers pinned to the data at a boundary point.

A barrier has the form

    v(x,t) = (n/alpha) f*((alpha/n)(x - y(t))) - c(t),

so that grad v = grad f*((alpha/n)(x - y)) and div grad f(grad v) = alpha.  With
z(t) = (n/alpha) grad f(w(t) + sign(alpha) lam nu), y = x_o - z and
c = (n/alpha) f*((alpha/n) z) - g(x_o,t), the barrier touches g at x_o and has
gradient w + sign(alpha) lam nu there.  alpha > 0 gives a lower barrier built
from the lower slope w-, alpha < 0 an upper barrier built from w+.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .boundary import BoundaryDatum, SlopeCertificate
from .geometry import ConvexDomain
from .integrand import ConvexIntegrand, conjugate, conjugate_growth_report, grad_conjugate, mirrored

Array = np.ndarray
GROWTH = 1.25
MARGIN = 0.9


class SearchExhausted(RuntimeError):
    def __init__(self, parameter, msg=""):
        self.parameter = parameter
        super().__init__(f"search for {parameter} exhausted: {msg}")


def alpha_min(f: ConvexIntegrand, dom: ConvexDomain, data: BoundaryDatum, cert: SlopeCertificate, n: int = 2) -> float:
    """max{n, diam |D^2 f| Qdot / eps + sup |dt g|}."""
    if cert.Qdot == 0:
        drift = 0.0
    else:
        drift = dom.diam * f.hess_sup * cert.Qdot / f.epsilon
    return float(max(n, drift + data.dt_g_sup))


@dataclass
class BarrierParameters:
    M: float
    Gamma: float
    rho0: float
    lam: float


def _directions(k):
    ang = 2 * np.pi * (np.arange(k) + 0.5) / k
    return np.stack([np.cos(ang), np.sin(ang)], -1)


def _sweep(start, condition, name, max_steps=80, strict=False):
    """Smallest start*1.25^k (k >= 1 if strict) for which condition(cand) and
    condition(0.9*cand) both hold on the test grid."""
    k0 = 1 if strict else 0
    for k in range(k0, max_steps):
        cand = start * GROWTH**k
        if condition(cand) and condition(MARGIN * cand):
            return cand
    raise SearchExhausted(name, f"no candidate up to {start * GROWTH**max_steps:.4g}")


def _ensure_radius(f: ConvexIntegrand) -> float:
    if f.smoothness_radius is None:
        conjugate_growth_report(f)
    return float(f.smoothness_radius)


def select_parameters(f: ConvexIntegrand, dom: ConvexDomain, data: BoundaryDatum, cert: SlopeCertificate,
                      alpha: float, n_directions: int = 64, n_times: int = 64, n: int = 2) -> BarrierParameters:
    """Geometric sweeps for M, Gamma, rho0 and lam.

    Upper barriers (alpha < 0) are reduced to lower ones for the mirrored
    integrand xi -> f(-xi) and slope -w+."""
    if cert.Q1 is None:
        raise ValueError("certificate must be widened first")
    if alpha > 0:
        fe, w = f, cert.widened_minus
    else:
        fe, w = mirrored(f), (lambda t: -cert.widened_plus(t))
    a = abs(alpha)
    r = _ensure_radius(f)
    fe.smoothness_radius = r
    eps, R, Q1, diam = f.epsilon, dom.R, cert.Q1, dom.diam
    dirs = _directions(n_directions)
    times = np.linspace(0.0, data.T, n_times)
    W = np.array([w(t) for t in times])
    nu = cert.nu
    scaled_conj = lambda x: (n / a) * conjugate(fe, (a / n) * x)

    def shells(rad):
        return rad * GROWTH ** np.arange(9)

    def cond_M(rad):
        return all(np.min(np.linalg.norm(grad_conjugate(fe, s * dirs), axis=1)) > R / eps + Q1 for s in shells(rad))

    M = _sweep(r + diam, cond_M, "M")

    rad = np.linspace(0.0, M, 65)
    pts = (rad[:, None, None] * dirs[None]).reshape(-1, 2)
    Gamma = float(np.max(np.atleast_1d(scaled_conj(pts)) + Q1 * np.linalg.norm(pts, axis=1)))

    def cond_rho(rho):
        for s in shells(rho):
            eta = s * dirs
            B = np.atleast_1d(scaled_conj(eta))[None, :] - W @ eta.T
            if B.min() < Gamma:
                return False
        return True

    rho0 = _sweep(M, cond_rho, "rho0")

    def cond_lam(lam):
        Z = (n / a) * fe.grad(W + lam * nu)
        return np.min(np.linalg.norm(Z, axis=1)) >= rho0

    lam = _sweep(Q1 + max(1.0, r), cond_lam, "lambda", strict=True)
    return BarrierParameters(float(M), Gamma, float(rho0), float(lam))


@dataclass
class Barrier:
    f: ConvexIntegrand
    alpha: float
    x_o: Array
    nu: Array
    lam: float
    w: Callable[[float], Array]
    dw: Callable[[float], Array]
    g_xo: Callable[[float], float]
    dtg_xo: Callable[[float], float]
    M: Optional[float] = None
    Gamma: Optional[float] = None
    rho0: Optional[float] = None
    Q1: Optional[float] = None
    n: int = 2

    @property
    def sign(self) -> str:
        return "lower" if self.alpha > 0 else "upper"

    @property
    def sigma(self) -> float:
        return 1.0 if self.alpha > 0 else -1.0

    def z_lambda(self, t):
        return (self.n / self.alpha) * self.f.grad(self.w(t) + self.sigma * self.lam * self.nu)

    def dz_lambda(self, t):
        H = self.f.hessian(self.w(t) + self.sigma * self.lam * self.nu)
        return (self.n / self.alpha) * H @ self.dw(t)

    def y(self, t):
        return self.x_o - self.z_lambda(t)

    def c(self, t):
        z = self.z_lambda(t)
        return float((self.n / self.alpha) * conjugate(self.f, (self.alpha / self.n) * z)) - float(self.g_xo(t))

    def eval(self, x, t):
        x = np.asarray(x, float)
        return (self.n / self.alpha) * conjugate(self.f, (self.alpha / self.n) * (x - self.y(t))) - self.c(t)

    def grad(self, x, t):
        x = np.asarray(x, float)
        return grad_conjugate(self.f, (self.alpha / self.n) * (x - self.y(t)))

    def dt(self, x, t):
        x = np.asarray(x, float)
        z = self.z_lambda(t)
        gx = grad_conjugate(self.f, (self.alpha / self.n) * (x - self.y(t)))
        go = grad_conjugate(self.f, (self.alpha / self.n) * z)
        return (gx - go) @ self.dz_lambda(t) + float(self.dtg_xo(t))

    def lip_budget(self, dom: ConvexDomain) -> float:
        q1 = self.Q1 if self.Q1 is not None else 0.0
        return abs(self.alpha) * dom.diam / (self.f.epsilon * self.n) + self.lam + q1


def _fd_dt(w, step):
    return lambda t: (np.asarray(w(t + step)) - np.asarray(w(t - step))) / (2 * step)


def build(f: ConvexIntegrand, dom: ConvexDomain, data: BoundaryDatum, cert: SlopeCertificate, alpha: float,
          sign: str | None = None, lam: float | None = None, params: BarrierParameters | None = None,
          **search) -> Barrier:
    """Barrier at cert.x_o.  Pass lam to skip the parameter search (explicit
    constructions); otherwise the sweeps of select_parameters are run."""
    if alpha == 0:
        raise ValueError("alpha must be nonzero")
    if sign is not None and sign != ("lower" if alpha > 0 else "upper"):
        raise ValueError("lower barriers need alpha > 0 and upper barriers alpha < 0")
    if cert.widening is None:
        raise ValueError("certificate must be widened first")
    if alpha > 0:
        w = cert.widened_minus
        dw = cert.dw_minus if cert.has_analytic_derivative else None
    else:
        w = cert.widened_plus
        dw = cert.dw_plus if cert.has_analytic_derivative else None
    if dw is None:
        step = 0.25 * (cert.times[1] - cert.times[0]) if len(cert.times) > 1 else 1e-4
        dw = _fd_dt(w, step)
    if lam is None:
        if params is None:
            params = select_parameters(f, dom, data, cert, alpha, **search)
        lam = params.lam
    x_o = np.asarray(cert.x_o, float)
    return Barrier(
        f=f, alpha=float(alpha), x_o=x_o, nu=np.asarray(cert.nu, float), lam=float(lam), w=w, dw=dw,
        g_xo=lambda t: float(data.g(x_o, t)), dtg_xo=lambda t: float(data.dt_g(x_o, t)),
        M=None if params is None else params.M, Gamma=None if params is None else params.Gamma,
        rho0=None if params is None else params.rho0, Q1=cert.Q1,
    )


def explicit_disk_barrier(f: ConvexIntegrand, dom: ConvexDomain, data: BoundaryDatum, cert: SlopeCertificate,
                          alpha: float) -> Barrier:
    """Closed-form construction for affine-in-space data on a disk with the
    quadratic integrand: lam = 1 + |alpha|/2, which for x_o = (-1,0) and
    g = x1 cos t + x2 sin t reproduces y = (2/alpha)(1 - cos t, -sin t)."""
    return build(f, dom, data, cert, alpha, lam=1.0 + abs(alpha) / 2.0)


@dataclass
class BarrierReport:
    pin_err: float
    ordering_viol: float
    subsol_viol: float
    lip_const: float
    divergence_err: float
    lip_budget: float
    dt_max: float
    dt_budget: float

    def row(self):
        return [self.pin_err, self.ordering_viol, self.subsol_viol, self.lip_const, self.divergence_err,
                self.lip_budget, self.dt_max, self.dt_budget]


def spiral_points(dom: ConvexDomain, count: int):
    """Sunflower points filling the closure, the last one on the boundary."""
    k = np.arange(count)
    s = np.sqrt(k / max(count - 1, 1))
    th = k * np.pi * (3 - np.sqrt(5))
    bd = dom.boundary(np.mod(th, 2 * np.pi))
    return dom.center + s[:, None] * (bd - dom.center)


def divergence_fd(b: Barrier, x, t, step):
    x = np.atleast_2d(np.asarray(x, float))
    out = np.zeros(len(x))
    for k in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[k] = step
        fp = b.f.grad(b.grad(x + e, t))[:, k]
        fm = b.f.grad(b.grad(x - e, t))[:, k]
        out += (fp - fm) / (2 * step)
    return out


def verify(b: Barrier, f: ConvexIntegrand, dom: ConvexDomain, data: BoundaryDatum,
           space_samples: int = 64, time_samples: int = 128, dt_g_bound: float | None = None,
           Qdot: float | None = None) -> BarrierReport:
    """Sampled checks of pinning, one-sided ordering, the sub/super-solution
    inequality, the divergence identity and the gradient budget.

    Space samples: space_samples sunflower points in the closure plus
    space_samples boundary points; times on a uniform grid of [0, T]."""
    inner = spiral_points(dom, space_samples)
    _, bdp = dom.boundary_samples(space_samples)
    pts = np.vstack([inner, bdp])
    times = np.linspace(0.0, data.T, time_samples)
    step = 1e-3 * dom.diam
    sig = b.sigma
    pin = order = sub = lip = div_err = dtmax = -np.inf
    for t in times:
        v = b.eval(pts, t)
        g = data.g(pts, t)
        order = max(order, float(np.max(sig * (v - g))))
        pin = max(pin, abs(float(b.eval(b.x_o, t)) - float(data.g(b.x_o, t))))
        lip = max(lip, float(np.max(np.linalg.norm(b.grad(pts, t), axis=1))))
        div = divergence_fd(b, inner, t, step)
        div_err = max(div_err, float(np.max(np.abs(div - b.alpha))))
        dtv = b.dt(inner, t)
        sub = max(sub, float(np.max(sig * (dtv - div))))
        dtmax = max(dtmax, float(np.max(np.abs(b.dt(pts, t)))))
    qd = Qdot if Qdot is not None else 0.0
    dgb = dt_g_bound if dt_g_bound is not None else data.dt_g_sup
    dt_budget = dom.diam * f.hess_sup * qd / f.epsilon + dgb if qd > 0 else dgb
    return BarrierReport(pin, order, sub, lip, div_err, b.lip_budget(dom), dtmax, dt_budget)


# ----------------------------------------------------- sublevel geometry

def sublevel_function(b: Barrier, x, t):
    """sigma (v - g(x_o) - w.(x - x_o)); the set where it is <= 0 contains the domain."""
    x = np.asarray(x, float)
    return b.sigma * (b.eval(x, t) - b.g_xo(t) - (x - b.x_o) @ b.w(t))


@dataclass
class SublevelReport:
    x_o_on_boundary: bool
    omega_contained: bool
    witness: Array
    pin_value: float
    max_on_domain: float


def sublevel_geometry(b: Barrier, dom: ConvexDomain, t: float, boundary_samples: int = 256,
                      tol: float = 1e-10) -> SublevelReport:
    at_xo = float(sublevel_function(b, b.x_o, t))
    _, bdp = dom.boundary_samples(boundary_samples)
    pts = np.vstack([dom.sample_points(16, boundary_samples // 4), bdp])
    vals = sublevel_function(b, pts, t)
    k = int(np.argmax(vals))
    return SublevelReport(abs(at_xo) <= tol, bool(vals[k] <= tol), pts[k], at_xo, float(vals[k]))


def sublevel_boundary(b: Barrier, dom: ConvexDomain, t: float, n: int = 256, xtol: float = 1e-14):
    """Points of the boundary of the sublevel set along n rays from the domain centre."""
    p = np.asarray(dom.center, float)
    phi = lambda x: float(sublevel_function(b, x, t))
    if phi(p) >= 0:
        raise ValueError("domain centre is not inside the sublevel set")
    theta = 2 * np.pi * np.arange(n) / n
    out = np.empty((n, 2))
    for k, th in enumerate(theta):
        d = np.array([np.cos(th), np.sin(th)])
        hi = dom.diam
        while phi(p + hi * d) <= 0:
            hi *= 2
            if hi > 1e8:
                raise SearchExhausted("sublevel radius", "set appears unbounded")
        s = brentq(lambda s: phi(p + s * d), 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
        out[k] = p + s * d
    return theta, out


def boundary_trace(b: Barrier, dom: ConvexDomain, data: BoundaryDatum, t: float, n: int = 256):
    """Rows (theta, g(x(theta),t), v(x(theta),t)) along the domain boundary."""
    theta, pts = dom.boundary_samples(n)
    return np.column_stack([theta, data.g(pts, t), b.eval(pts, t)])


def sublevel_trace(b: Barrier, dom: ConvexDomain, t: float, n: int = 256):
    """Rows (theta, x1, x2, v) on the boundary of the sublevel set."""
    theta, pts = sublevel_boundary(b, dom, t, n)
    return np.column_stack([theta, pts, b.eval(pts, t)])


def curvature_samples(pts):
    """Discrete curvature of a closed polygon via circumscribed circles of consecutive triples."""
    a, bb, c = np.roll(pts, 1, 0), pts, np.roll(pts, -1, 0)
    ab = np.linalg.norm(bb - a, axis=1)
    bc = np.linalg.norm(c - bb, axis=1)
    ca = np.linalg.norm(a - c, axis=1)
    cross = np.abs((bb - a)[:, 0] * (c - a)[:, 1] - (bb - a)[:, 1] * (c - a)[:, 0])
    return 2 * cross / (ab * bc * ca)
