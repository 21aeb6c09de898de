"""Convex integrands, their Legendre-Fenchel conjugates and inverse gradients.

An integrand is stored as vectorized callables acting on arrays of shape
(..., n).  Catalog entries carry closed-form conjugates; everything else falls
back to numerical concave maximization of eta.xi - f(xi).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Array = np.ndarray


class MaximizerOnBoundary(RuntimeError):
    """The conjugate maximizer reached the search radius (growth too weak)."""


class NonConvergence(RuntimeError):
    pass


class IdentityViolation(RuntimeError):
    """grad f at the returned maximizer does not reproduce eta."""


class GrowthViolation(RuntimeError):
    pass


@dataclass
class ConvexIntegrand:
    name: str
    eval: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    epsilon: float
    hess_sup: float
    hess: Optional[Callable[[Array], Array]] = None
    analytic_conjugate: Optional[Callable[[Array], Array]] = None
    analytic_grad_conjugate: Optional[Callable[[Array], Array]] = None
    # sup of |D^2 f| over a ball of given radius; used for step sizes
    hess_bound_fn: Optional[Callable[[float], float]] = None
    smoothness_radius: Optional[float] = None
    params: dict = field(default_factory=dict)

    def hessian(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.hess is not None:
            return self.hess(xi)
        return fd_hessian(self.grad, xi)

    def hess_bound(self, radius: float) -> float:
        if self.hess_bound_fn is not None:
            return float(self.hess_bound_fn(radius))
        # sampled estimate on the ball
        rad = np.linspace(0.0, radius, 41)[1:]
        ang = np.linspace(0.0, 2 * np.pi, 33)[:-1]
        pts = np.stack([np.outer(rad, np.cos(ang)), np.outer(rad, np.sin(ang))], -1).reshape(-1, 2)
        H = self.hessian(pts)
        return float(np.max(np.linalg.norm(H, ord=2, axis=(-2, -1))))


def fd_hessian(grad, xi):
    """Central-difference Hessian of a gradient map, step 1e-4*max(1,|xi|)."""
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[-1]
    step = 1e-4 * np.maximum(1.0, np.linalg.norm(xi, axis=-1))
    H = np.empty(xi.shape + (n,))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        d = step[..., None] * e
        H[..., :, j] = (grad(xi + d) - grad(xi - d)) / (2 * step[..., None])
    return 0.5 * (H + np.swapaxes(H, -1, -2))


# ---------------------------------------------------------------- catalog

def _norm(x):
    return np.linalg.norm(x, axis=-1)


def quadratic() -> ConvexIntegrand:
    """f = |xi|^2 / 2, self-conjugate."""
    def hess(xi):
        xi = np.asarray(xi, float)
        return np.broadcast_to(np.eye(xi.shape[-1]), xi.shape + (xi.shape[-1],)).copy()

    return ConvexIntegrand(
        name="quadratic",
        eval=lambda xi: 0.5 * np.sum(np.asarray(xi, float) ** 2, axis=-1),
        grad=lambda xi: np.array(xi, dtype=float),
        hess=hess,
        epsilon=1.0,
        hess_sup=1.0,
        analytic_conjugate=lambda eta: 0.5 * np.sum(np.asarray(eta, float) ** 2, axis=-1),
        analytic_grad_conjugate=lambda eta: np.array(eta, dtype=float),
        hess_bound_fn=lambda radius: 1.0,
        smoothness_radius=0.0,
    )


def quartic() -> ConvexIntegrand:
    """f = |xi|^4 / 4; conjugate (3/4)|eta|^(4/3)."""
    def grad(xi):
        xi = np.asarray(xi, float)
        return np.sum(xi**2, axis=-1, keepdims=True) * xi

    def hess(xi):
        xi = np.asarray(xi, float)
        n = xi.shape[-1]
        s = np.sum(xi**2, axis=-1)[..., None, None]
        return s * np.eye(n) + 2 * xi[..., :, None] * xi[..., None, :]

    def grad_conj(eta):
        eta = np.asarray(eta, float)
        r = _norm(eta)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r > 0, eta * r ** (-2.0 / 3.0), 0.0)
        return out

    return ConvexIntegrand(
        name="quartic",
        eval=lambda xi: 0.25 * np.sum(np.asarray(xi, float) ** 2, axis=-1) ** 2,
        grad=grad,
        hess=hess,
        epsilon=1.0,
        # D^2 f grows like 3|xi|^2, so no global bound outside B_1
        hess_sup=np.inf,
        analytic_conjugate=lambda eta: 0.75 * _norm(np.asarray(eta, float)) ** (4.0 / 3.0),
        analytic_grad_conjugate=grad_conj,
        hess_bound_fn=lambda radius: 3.0 * radius**2,
        smoothness_radius=None,
    )


def flat_bottomed() -> ConvexIntegrand:
    """f = max(0,|xi|-1)^2 + |xi|^2/2: C^1 everywhere, C^2 off the unit circle.

    Radial profile phi(rho) with phi'(rho) = rho + 2(rho-1)_+, so the inverse
    gradient is radial with rho = s for s <= 1 and rho = (s+2)/3 otherwise.
    """
    def ev(xi):
        r = _norm(np.asarray(xi, float))
        return np.maximum(0.0, r - 1.0) ** 2 + 0.5 * r**2

    def grad(xi):
        xi = np.asarray(xi, float)
        r = _norm(xi)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 1.0, 1.0 + 2.0 * (r - 1.0) / r, 1.0)
        return scale * xi

    def hess(xi):
        xi = np.asarray(xi, float)
        n = xi.shape[-1]
        r = _norm(xi)[..., None, None]
        eye = np.eye(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = xi[..., :, None] * xi[..., None, :] / np.where(r > 0, r**2, 1.0)
            outer = 3.0 * u + (1.0 + 2.0 * (r - 1.0) / np.where(r > 0, r, 1.0)) * (eye - u)
        return np.where(r > 1.0, outer, eye)

    def conj(eta):
        s = _norm(np.asarray(eta, float))
        rho = np.where(s <= 1.0, s, (s + 2.0) / 3.0)
        return s * rho - (np.maximum(0.0, rho - 1.0) ** 2 + 0.5 * rho**2)

    def grad_conj(eta):
        eta = np.asarray(eta, float)
        s = _norm(eta)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(s <= 1.0, 1.0, (s + 2.0) / (3.0 * np.where(s > 0, s, 1.0)))
        return scale * eta

    return ConvexIntegrand(
        name="flat_bottomed",
        eval=ev,
        grad=grad,
        hess=hess,
        epsilon=1.0,
        hess_sup=3.0,
        analytic_conjugate=conj,
        analytic_grad_conjugate=grad_conj,
        hess_bound_fn=lambda radius: 3.0,
        smoothness_radius=None,
    )


def euclidean_norm() -> ConvexIntegrand:
    """f = |xi|. Convex but not uniformly convex; used as a negative control."""
    def grad(xi):
        xi = np.asarray(xi, float)
        r = _norm(xi)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r > 0, xi / np.where(r > 0, r, 1.0), 0.0)

    return ConvexIntegrand(
        name="norm",
        eval=lambda xi: _norm(np.asarray(xi, float)),
        grad=grad,
        epsilon=1.0,
        hess_sup=1.0,
    )


CATALOG = {
    "quadratic": quadratic,
    "quartic": quartic,
    "flat_bottomed": flat_bottomed,
    "norm": euclidean_norm,
}


def by_name(name: str) -> ConvexIntegrand:
    try:
        return CATALOG[name]()
    except KeyError:
        raise ValueError(f"unknown integrand {name!r}; choose from {sorted(CATALOG)}") from None


# ---------------------------------------------------------- conjugation

def _golden_max(fun, a, b, tol=1e-13, max_iter=300):
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    # the endpoints are candidates too (maximizer may sit at 0 or on the radius)
    cands = [(fun(a), a), (fun(b), b), (fun(0.5 * (a + b)), 0.5 * (a + b))]
    return max(cands)[1]


def _radial_fallback(f, eta, search_radius):
    nrm = np.linalg.norm(eta)
    direction = eta / nrm if nrm > 0 else np.eye(eta.size)[0]

    def obj(s):
        return s * nrm - float(f.eval(s * direction))

    s = _golden_max(obj, 0.0, search_radius)
    return s * direction


def maximize_dual(f: ConvexIntegrand, eta, search_radius=50.0, tol=1e-10, max_iter=200):
    """Maximizer of xi -> eta.xi - f(xi) by damped Newton with radial fallback."""
    eta = np.asarray(eta, dtype=float)
    # start at eta, pulled inside the search ball
    xi = eta * min(1.0, 0.5 * search_radius / max(float(np.linalg.norm(eta)), 1e-300))
    phi = float(eta @ xi - f.eval(xi))
    scale = max(1.0, float(np.linalg.norm(eta)))
    converged = False
    for _ in range(max_iter):
        g = eta - f.grad(xi)
        if np.linalg.norm(g) <= tol * scale:
            converged = True
            break
        H = f.hessian(xi)
        H = H + 1e-12 * max(1.0, float(np.abs(H).max())) * np.eye(eta.size)
        try:
            p = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(p)) or g @ p <= 0:
            p = g
        t = 1.0
        while t > 1e-12:
            cand = xi + t * p
            phi_c = float(eta @ cand - f.eval(cand))
            if phi_c >= phi + 1e-4 * t * (g @ p) or (phi_c >= phi and t < 1e-6):
                break
            t *= 0.5
        else:
            break
        xi, phi = cand, phi_c
    if not converged:
        xi = _radial_fallback(f, eta, search_radius)
        if np.linalg.norm(xi) >= search_radius * (1 - 1e-9):
            raise MaximizerOnBoundary(
                f"maximizer for eta={eta.tolist()} is on the search radius {search_radius}")
        # first-order check where f is differentiable away from the origin
        if np.linalg.norm(xi) > 1e-6:
            res = np.linalg.norm(eta - f.grad(xi))
            if res > 1e-6 * scale:
                raise NonConvergence(f"no stationary point found for eta={eta.tolist()} (residual {res:.3e})")
    if np.linalg.norm(xi) >= search_radius:
        raise MaximizerOnBoundary(f"maximizer for eta={eta.tolist()} outside radius {search_radius}")
    return xi


def conjugate(f: ConvexIntegrand, eta, search_radius=50.0, use_analytic=True):
    """f*(eta) = sup_xi eta.xi - f(xi). Accepts a single point or an (..., n) array."""
    eta = np.asarray(eta, dtype=float)
    if use_analytic and f.analytic_conjugate is not None:
        return f.analytic_conjugate(eta)
    flat = eta.reshape(-1, eta.shape[-1])
    out = np.empty(flat.shape[0])
    for k, e in enumerate(flat):
        xi = maximize_dual(f, e, search_radius)
        out[k] = e @ xi - float(f.eval(xi))
    return out.reshape(eta.shape[:-1]) if eta.ndim > 1 else float(out[0])


def grad_conjugate(f: ConvexIntegrand, eta, search_radius=50.0, use_analytic=True, tol=1e-8):
    """grad f*(eta), i.e. the inverse of grad f evaluated at eta."""
    eta = np.asarray(eta, dtype=float)
    if use_analytic and f.analytic_grad_conjugate is not None:
        return f.analytic_grad_conjugate(eta)
    flat = eta.reshape(-1, eta.shape[-1])
    out = np.empty_like(flat)
    for k, e in enumerate(flat):
        xi = maximize_dual(f, e, search_radius)
        res = np.linalg.norm(f.grad(xi) - e)
        if res > tol * max(1.0, np.linalg.norm(e)):
            raise IdentityViolation(f"|grad f(xi*) - eta| = {res:.3e} at eta={e.tolist()}")
        out[k] = xi
    return out.reshape(eta.shape)


def conjugate_hessian(f: ConvexIntegrand, eta, step=None, use_analytic=True):
    """Finite-difference D^2 f* from the inverse gradient."""
    eta = np.asarray(eta, dtype=float)
    gc = lambda e: grad_conjugate(f, e, use_analytic=use_analytic)
    if step is None:
        return fd_hessian(gc, eta)
    n = eta.shape[-1]
    H = np.empty(eta.shape + (n,))
    for j in range(n):
        d = np.zeros(n)
        d[j] = step
        H[..., :, j] = (gc(eta + d) - gc(eta - d)) / (2 * step)
    return 0.5 * (H + np.swapaxes(H, -1, -2))


# --------------------------------------------------------------- reports

@dataclass
class ConvexityReport:
    min_eigenvalue: float
    witness: Array
    passed: bool


def _ring_samples(r_lo, r_hi, samples, n=2):
    n_r = max(2, int(np.ceil(np.sqrt(samples))))
    n_t = max(4, int(np.ceil(samples / n_r)))
    rad = np.linspace(r_lo, r_hi, n_r)
    ang = 2 * np.pi * np.arange(n_t) / n_t
    pts = np.stack([np.outer(rad, np.cos(ang)), np.outer(rad, np.sin(ang))], -1)
    return pts.reshape(-1, 2)


def check_uniform_convexity(f: ConvexIntegrand, samples=400, sample_radius=3.0, tol=1e-8) -> ConvexityReport:
    """Smallest sampled Hessian eigenvalue over 1 < |xi| <= sample_radius."""
    pts = _ring_samples(1.0 + 1e-6, sample_radius, samples)
    H = f.hessian(pts)
    eig = np.linalg.eigvalsh(H)[:, 0]
    k = int(np.argmin(eig))
    return ConvexityReport(float(eig[k]), pts[k], bool(eig[k] >= f.epsilon - tol))


@dataclass
class GrowthReport:
    quadratic_upper_c: float
    smoothness_radius_r: float
    conj_hess_bound: float


def conjugate_growth_report(f: ConvexIntegrand, radii=None, n_directions=32, tol=1e-3,
                            use_analytic=True) -> GrowthReport:
    """Sampled constant c in f* <= (2/eps)|eta|^2 + c and the radius r beyond
    which the finite-difference D^2 f* is stable with norm <= 1/eps + tol.
    The radius is stored on the integrand."""
    if radii is None:
        # a fine geometric layer near 0 catches the small-|eta| maximum of f* - (2/eps)|eta|^2
        radii = np.union1d(np.linspace(0.0, 8.0, 33), np.geomspace(1e-3, 0.25, 17))
    radii = np.asarray(radii, float)
    ang = 2 * np.pi * (np.arange(n_directions) + 0.5) / n_directions
    dirs = np.stack([np.cos(ang), np.sin(ang)], -1)
    eps = f.epsilon

    c = 0.0
    for rho in radii:
        pts = rho * dirs
        vals = np.atleast_1d(conjugate(f, pts, use_analytic=use_analytic))
        excess = vals - (2.0 / eps) * rho**2
        if not np.all(np.isfinite(excess)):
            raise GrowthViolation(f"non-finite conjugate at radius {rho}")
        c = max(c, float(excess.max()))

    ok = np.zeros(radii.size, dtype=bool)
    norms = np.full(radii.size, np.inf)
    for k, rho in enumerate(radii):
        pts = rho * dirs
        step = 1e-3 * max(1.0, rho)
        try:
            H1 = conjugate_hessian(f, pts, step=step, use_analytic=use_analytic)
            H2 = conjugate_hessian(f, pts, step=step / 2, use_analytic=use_analytic)
        except (MaximizerOnBoundary, NonConvergence, IdentityViolation):
            continue
        if not (np.all(np.isfinite(H1)) and np.all(np.isfinite(H2))):
            continue
        stable = np.max(np.abs(H1 - H2)) <= tol
        nrm = float(np.max(np.linalg.norm(H2, ord=2, axis=(-2, -1))))
        norms[k] = nrm
        ok[k] = stable and nrm <= 1.0 / eps + tol
    # r: first radius from which every larger sampled radius passes
    r = np.inf
    for k in range(radii.size - 1, -1, -1):
        if not ok[k]:
            break
        r = radii[k]
    bound = float(np.max(norms[radii >= r])) if np.isfinite(r) else np.inf
    f.smoothness_radius = float(r)
    return GrowthReport(float(c), float(r), bound)


def conjugate_table(f: ConvexIntegrand, etas):
    """Rows (eta_1, eta_2, f*(eta)) for export."""
    etas = np.asarray(etas, float)
    vals = np.atleast_1d(conjugate(f, etas))
    return np.column_stack([etas, vals])


def mirrored(f: ConvexIntegrand) -> ConvexIntegrand:
    """xi -> f(-xi). Turns an upper-barrier construction into a lower one."""
    neg = lambda fn: (None if fn is None else (lambda x: fn(-np.asarray(x, float))))
    negneg = lambda fn: (None if fn is None else (lambda x: -fn(-np.asarray(x, float))))
    return ConvexIntegrand(
        name=f"mirrored_{f.name}",
        eval=neg(f.eval),
        grad=negneg(f.grad),
        hess=neg(f.hess) if f.hess is not None else None,
        epsilon=f.epsilon,
        hess_sup=f.hess_sup,
        analytic_conjugate=neg(f.analytic_conjugate),
        analytic_grad_conjugate=negneg(f.analytic_grad_conjugate),
        hess_bound_fn=f.hess_bound_fn,
        smoothness_radius=f.smoothness_radius,
        params=dict(f.params),
    )
