"""Gradient-constrained minimizing movements on P1 finite elements.

Step i minimizes

    F_i(v) = sum_e |T_e| f(grad v|_e) + (1/2h) (v - u_{i-1})^T M (v - u_{i-1})

over nodal vectors with v = g(ih) at boundary vertices and |grad v|_e <= L on
every element.  The unknown is the deviation x = v - I g(ih) on interior nodes,
which makes the scheme exactly equivariant under constant shifts of the data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla
from scipy.spatial.distance import pdist

from .boundary import BoundaryDatum
from .geometry import Mesh, discrete_lipschitz
from .integrand import ConvexIntegrand
from .mollify import TimeSeriesField

log = logging.getLogger(__name__)


FEAS_TOL = 1e-10   # relative feasibility of accepted iterates


class InnerNonConvergence(RuntimeError):
    pass


class InfeasibleConstraint(ValueError):
    pass


class EstimateViolated(RuntimeError):
    def __init__(self, index, slack):
        self.index, self.slack = index, slack
        super().__init__(f"energy estimate violated at step {index} (slack {slack:.3e})")


class BoundaryMismatch(ValueError):
    pass


class GridMismatch(ValueError):
    pass


@dataclass
class SolverConfig:
    h: float
    L: float
    mesh: Mesh
    integrand: ConvexIntegrand
    data: BoundaryDatum
    inner_tol: float = 1e-10
    inner_max_iter: int = 20000
    constraint_mode: str = "projection"
    projection_sweeps: int = 5000
    projection_tol: float = 1e-10

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("h must be positive")
        steps = self.data.T / self.h
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"h = {self.h} does not divide T = {self.data.T}")
        if self.constraint_mode not in ("projection", "penalty"):
            raise ValueError("constraint_mode must be 'projection' or 'penalty'")
        gbound = self.data.grad_g_sup
        if not self.L > gbound:
            raise InfeasibleConstraint(
                f"L = {self.L:g} must exceed the gradient bound {gbound:g} of the boundary data; "
                "otherwise the constrained admissible class is empty")

    @property
    def n_steps(self) -> int:
        return int(round(self.data.T / self.h))


def energy(mesh: Mesh, f: ConvexIntegrand, u) -> float:
    return float(mesh.element_measures @ f.eval(mesh.element_gradients(u)))


# ------------------------------------------------------------ projection

def _local_projection(A, a, z, L, tol=1e-14, svd=None):
    """Nearest z' to z (rows) with |a + A z'| <= L, per element.  A: (m,2,3);
    svd = (U, S) of A may be passed when A is reused."""
    w0 = a + np.einsum("mij,mj->mi", A, z)
    nrm = np.sqrt(w0[:, 0] ** 2 + w0[:, 1] ** 2)
    out = z.copy()
    bad = nrm > L
    if not bad.any():
        return out
    Ab, zb, wb = A[bad], z[bad], w0[bad]
    if svd is None:
        U, S, _ = np.linalg.svd(Ab, full_matrices=False)
    else:
        U, S = svd[0][bad], svd[1][bad]
    c = np.einsum("mji,mj->mi", U, wb)          # U^T w0
    s2 = S**2
    mu = np.zeros(len(zb))
    for _ in range(60):
        den = 1.0 + mu[:, None] * s2
        q = np.sqrt(np.sum((c / den) ** 2, axis=1))
        dq = -np.sum(c**2 * s2 / den**3, axis=1) / q
        psi = 1.0 / L - 1.0 / q
        if np.all(np.abs(q - L) <= tol * L):
            break
        # psi is convex and decreasing in mu, so Newton from mu = 0 increases monotonically to the root
        dpsi = dq / q**2
        step = np.where(dpsi < 0, psi / np.where(dpsi < 0, dpsi, -1.0), 0.0)
        mu = np.maximum(mu - step, 0.0)
    w_hat = c / (1.0 + mu[:, None] * s2)
    # z' = z - mu A^T w'
    w_new = np.einsum("mij,mj->mi", U, w_hat)
    out[bad] = zb - mu[:, None] * np.einsum("mji,mj->mi", Ab, w_new)
    return out


class _StepProblem:
    """Objective, gradient and feasible-set projection for one time step."""

    def __init__(self, mesh: Mesh, f: ConvexIntegrand, h: float, L: float, u_prev, g_nodes,
                 sweeps=50, proj_tol=1e-10):
        self.mesh, self.f, self.h, self.L = mesh, f, h, L
        self.free = mesh.interior_vertices
        self.area = mesh.element_measures
        Gx, Gy = mesh.grad_matrices
        self.Gx_f = Gx[:, self.free].tocsr()
        self.Gy_f = Gy[:, self.free].tocsr()
        self.GxT = self.Gx_f.T.tocsr()
        self.GyT = self.Gy_f.T.tocsr()
        M = mesh.mass_matrix
        self.M_ff = M[self.free][:, self.free].tocsr()
        self.base = mesh.element_gradients(g_nodes)
        r0 = np.asarray(g_nodes, float) - np.asarray(u_prev, float)
        self.r0 = r0
        self.Mr0_f = (M @ r0)[self.free]
        self.r0Mr0 = float(r0 @ (M @ r0))
        self.g_nodes = np.asarray(g_nodes, float)
        # local operators with boundary columns removed
        mask = np.zeros(mesh.n_vertices, bool)
        mask[self.free] = True
        self._free_mask = mask
        self._P = None
        self.loc_mask = mask[mesh.simplices]
        self.A_loc = mesh.gradient_operators * self.loc_mask[:, None, :]
        self.colors = mesh.coloring()
        self._svd = []
        for col in self.colors:
            U, S, _ = np.linalg.svd(self.A_loc[col], full_matrices=False)
            self._svd.append((U, S))
        self.sweeps, self.proj_tol = sweeps, proj_tol
        self.pos = np.full(mesh.n_vertices, -1)
        self.pos[self.free] = np.arange(len(self.free))

    def grads(self, x):
        return self.base + np.column_stack([self.Gx_f @ x, self.Gy_f @ x])

    def objective(self, x):
        e = float(self.area @ self.f.eval(self.grads(x)))
        quad = self.r0Mr0 + 2 * (self.Mr0_f @ x) + x @ (self.M_ff @ x)
        return e + quad / (2 * self.h)

    def gradient(self, x):
        fl = self.area[:, None] * self.f.grad(self.grads(x))
        return self.GxT @ fl[:, 0] + self.GyT @ fl[:, 1] + (self.M_ff @ x + self.Mr0_f) / self.h

    def lipschitz(self):
        n = len(self.free)
        if n == 0:
            return 1.0
        W = self.area
        Kff = self.GxT @ (self.Gx_f.multiply(W[:, None])) + self.GyT @ (self.Gy_f.multiply(W[:, None]))
        if n <= 3:
            lk = float(np.linalg.eigvalsh(Kff.toarray())[-1])
            lm = float(np.linalg.eigvalsh(self.M_ff.toarray())[-1])
        else:
            v0 = np.ones(n)
            lk = float(spla.eigsh(Kff, k=1, which="LA", v0=v0, return_eigenvectors=False, tol=1e-6)[0])
            lm = float(spla.eigsh(self.M_ff, k=1, which="LA", v0=v0, return_eigenvectors=False, tol=1e-6)[0])
        hb = self.f.hess_bound(self.L)
        return 1.02 * (lk * hb + lm / self.h)

    def max_violation(self, x):
        return float(np.max(np.linalg.norm(self.grads(x), axis=1)) - self.L)

    def project(self, x, feas_tol=None):
        """Dykstra over vertex-disjoint element colours.  The increments are the
        block dual variables of the projection problem, so they are carried
        over between calls as a warm start (block ascent converges from any
        start in the range of A_e^T)."""
        if self.max_violation(x) <= 1e-13 * self.L:
            return x
        feas = FEAS_TOL * self.L if feas_tol is None else max(feas_tol, FEAS_TOL * self.L)
        simp = self.mesh.simplices
        P = self._P if self._P is not None else np.zeros((len(simp), 3))
        X = np.zeros(self.mesh.n_vertices)
        X[self.free] = x
        np.subtract.at(X, simp, P)
        X[~self._free_mask] = 0.0
        for _ in range(self.sweeps):
            X_old = X.copy()
            for col, svd in zip(self.colors, self._svd):
                idx = simp[col]
                Z = X[idx] + P[col]
                Zp = _local_projection(self.A_loc[col], self.base[col], Z, self.L, svd=svd)
                P[col] = Z - Zp
                X[idx] = np.where(self.loc_mask[col], Zp, 0.0)
            if np.max(np.abs(X - X_old)) <= self.proj_tol and self.max_violation(X[self.free]) <= feas:
                break
        self._P = P
        return X[self.free]


def _apg(prob: _StepProblem, x0, tol, max_iter, lip):
    """Accelerated projected gradient with adaptive restart.

    Projections far from convergence are computed to a feasibility tolerance
    tied to the current step length; the accepted iterate is always feasible
    to FEAS_TOL."""
    s = 1.0 / lip
    x = prob.project(x0)
    y = x.copy()
    t = 1.0
    feas = np.inf
    for it in range(1, max_iter + 1):
        x_new = prob.project(y - s * prob.gradient(y), feas)
        res = np.linalg.norm(x_new - y) / s
        if res <= tol:
            if prob.max_violation(x_new) <= FEAS_TOL * prob.L:
                return x_new, it, res
            feas = 0.0
        else:
            feas = min(feas, 1e-2 * res * s)
        if (y - x_new) @ (x_new - x) > 0:
            t = 1.0
            y = x_new.copy()
        else:
            t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            y = x_new + ((t - 1) / t_new) * (x_new - x)
            t = t_new
        x = x_new
    raise InnerNonConvergence(f"gradient-mapping residual {res:.3e} above {tol:.1e} after {max_iter} iterations")


def _penalty(prob: _StepProblem, x0, tol, max_iter, lip, mu_max=1e4, inner_tol=1e-6):
    """Warm start by quadratic penalty continuation on max(0, |grad|^2 - L^2),
    then finish with the projected solver so the result is exactly feasible."""
    L2 = prob.L**2
    mu = 1.0 / max(L2, 1.0)
    x = x0.copy()
    total = 0
    budget = max(max_iter // 4, 1)
    while mu <= mu_max and total < budget:
        def obj(z):
            gr = prob.grads(z)
            exc = np.maximum(0.0, np.sum(gr**2, 1) - L2)
            return prob.objective(z) + mu * float(prob.area @ exc**2)

        def grad(z):
            gr = prob.grads(z)
            exc = np.maximum(0.0, np.sum(gr**2, 1) - L2)
            fl = (4 * mu * prob.area * exc)[:, None] * gr
            return prob.gradient(z) + prob.GxT @ fl[:, 0] + prob.GyT @ fl[:, 1]

        step = 1.0 / lip
        y, xk, t = x.copy(), x.copy(), 1.0
        while total < budget:
            total += 1
            gy, fy = grad(y), obj(y)
            while True:
                cand = y - step * gy
                if obj(cand) <= fy - 0.5 * step * (gy @ gy) + 1e-15 * abs(fy):
                    break
                step *= 0.5
            if np.linalg.norm(gy) <= inner_tol:
                xk = cand
                break
            t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            y = cand + ((t - 1) / t_new) * (cand - xk)
            if obj(y) > obj(cand):
                y, t_new = cand.copy(), 1.0
            xk, t = cand, t_new
        x = xk
        if prob.max_violation(x) <= inner_tol * prob.L:
            break
        mu *= 4.0
    x, it, res = _apg(prob, x, tol, max_iter, lip)
    return x, total + it, res


@dataclass
class StepInfo:
    iterations: int
    residual: float
    objective: float
    objective_at_data: float


def step(u_prev, g_nodes, cfg: SolverConfig, x0=None, info: list | None = None):
    """One minimizing-movement step; returns the nodal minimizer."""
    mesh = cfg.mesh
    g_nodes = np.asarray(g_nodes, float)
    gl = np.linalg.norm(mesh.element_gradients(g_nodes), axis=1)
    if np.any(gl > cfg.L * (1 + 1e-12)):
        raise InfeasibleConstraint(
            f"boundary interpolant has element gradient {gl.max():.6g} > L = {cfg.L:g}")
    prob = _StepProblem(mesh, cfg.integrand, cfg.h, cfg.L, u_prev, g_nodes,
                        cfg.projection_sweeps, cfg.projection_tol)
    if len(prob.free) == 0:
        if info is not None:
            info.append(StepInfo(0, 0.0, prob.objective(np.zeros(0)), prob.objective(np.zeros(0))))
        return g_nodes.copy()
    if x0 is None:
        x0 = np.zeros(len(prob.free))
    lip = prob.lipschitz()
    if cfg.constraint_mode == "projection":
        x, it, res = _apg(prob, x0, cfg.inner_tol, cfg.inner_max_iter, lip)
    else:
        x, it, res = _penalty(prob, x0, cfg.inner_tol, cfg.inner_max_iter, lip)
    viol = prob.max_violation(x)
    if viol > 1e-8 * cfg.L:
        raise InnerNonConvergence(f"iterate violates the gradient constraint by {viol:.3e}")
    obj, obj0 = prob.objective(x), prob.objective(np.zeros_like(x))
    if obj > obj0 + 1e-9 * max(1.0, abs(obj0)):
        raise InnerNonConvergence(f"objective {obj:.12g} above its value {obj0:.12g} at the data")
    if info is not None:
        info.append(StepInfo(it, res, obj, obj0))
    out = g_nodes.copy()
    out[prob.free] += x
    return out


def step_objective(mesh, f, h, u_prev, v) -> float:
    d = np.asarray(v, float) - np.asarray(u_prev, float)
    return energy(mesh, f, v) + float(d @ (mesh.mass_matrix @ d)) / (2 * h)


# ------------------------------------------------------------ trajectory

@dataclass
class Trajectory:
    mesh: Mesh
    h: float
    times: np.ndarray
    steps: np.ndarray            # (l+1, N)
    energies: np.ndarray
    increments: np.ndarray       # increments[0] = 0
    step_info: list = field(default_factory=list)
    config: Optional[SolverConfig] = None

    def step_index(self, t) -> int:
        """i with t in ((i-1)h, ih]; 0 for t = 0."""
        if t <= 0:
            return 0
        i = int(np.ceil(t / self.h - 1e-9))
        return min(i, len(self.steps) - 1)

    def piecewise_constant(self, t):
        return self.steps[self.step_index(t)]

    def interpolant(self, t):
        s = np.clip(t / self.h, 0, len(self.steps) - 1)
        i = min(int(np.floor(s)), len(self.steps) - 2)
        lam = s - i
        return (1 - lam) * self.steps[i] + lam * self.steps[i + 1]

    def table(self, i):
        return np.column_stack([self.mesh.vertices, self.steps[i]])


def solve(cfg: SolverConfig, u0=None) -> Trajectory:
    mesh, f, data = cfg.mesh, cfg.integrand, cfg.data
    n = cfg.n_steps
    times = cfg.h * np.arange(n + 1)
    U = np.empty((n + 1, mesh.n_vertices))
    g_prev = mesh.interpolate(lambda x: data.g(x, 0.0))
    U[0] = g_prev if u0 is None else np.asarray(u0, float)
    infos = []
    free = mesh.interior_vertices
    for i in range(1, n + 1):
        g_i = mesh.interpolate(lambda x: data.g(x, times[i]))
        # warm start u_{i-1} + g_i - g_{i-1}, expressed as deviation from g_i
        x0 = (U[i - 1] - g_prev)[free]
        try:
            U[i] = step(U[i - 1], g_i, cfg, x0=x0, info=infos)
        except (InnerNonConvergence, InfeasibleConstraint) as exc:
            raise type(exc)(f"step {i}: {exc}") from exc
        g_prev = g_i
        log.debug("step %d: %d iterations", i, infos[-1].iterations)
    M = mesh.mass_matrix
    en = np.array([energy(mesh, f, u) for u in U])
    dU = np.diff(U, axis=0)
    inc = np.concatenate([[0.0], np.einsum("ij,ij->i", dU, (M @ dU.T).T) / (2 * cfg.h)])
    return Trajectory(mesh, cfg.h, times, U, en, inc, infos, cfg)


# ------------------------------------------------------------ diagnostics

@dataclass
class EnergyReport:
    rows: np.ndarray       # columns: i, energy_i, increment_i, data_term_i, slack_i
    lhs: np.ndarray
    rhs: np.ndarray
    K: float
    worst_slack: float
    worst_index: int

    def table(self):
        return self.rows[:, [0, 1, 2, 4]]


def _grad_sup_on_ball(f: ConvexIntegrand, radius: float, n_dir=64, n_rad=16) -> float:
    ang = 2 * np.pi * np.arange(n_dir) / n_dir
    rad = np.linspace(0.0, radius, n_rad + 1)[1:]
    pts = (rad[:, None, None] * np.stack([np.cos(ang), np.sin(ang)], -1)[None]).reshape(-1, 2)
    return float(np.max(np.linalg.norm(f.grad(pts), axis=1)))


def energy_report(traj: Trajectory, cfg: SolverConfig, tol: float = 1e-7, quad_points: int = 4,
                  raise_on_violation: bool = True) -> EnergyReport:
    """Telescoped estimate E(u_l') + sum_{i<=l'} (1/2h)|u_i - u_{i-1}|^2
    <= E(u_0) + sum_{i<=l'} int_{t_{i-1}}^{t_i} [ |I dt g|^2/2 + K |grad I dt g|_1 ] dt,
    with all norms discrete (mass matrix, element areas) and K the sup of |grad f|
    on the ball of radius L + max_i Lip(I g_i - I g_{i-1})."""
    mesh, f, data, h = cfg.mesh, cfg.integrand, cfg.data, cfg.h
    M = mesh.mass_matrix
    area = mesh.element_measures
    U = traj.steps
    n = len(U) - 1
    en = np.array([energy(mesh, f, u) for u in U])
    dU = np.diff(U, axis=0)
    inc = np.concatenate([[0.0], np.einsum("ij,ij->i", dU, (M @ dU.T).T) / (2 * h)])
    g_nodes = [mesh.interpolate(lambda x, t=t: data.g(x, t)) for t in traj.times]
    dg_lip = max((discrete_lipschitz(g_nodes[i] - g_nodes[i - 1], mesh) for i in range(1, n + 1)), default=0.0)
    K = _grad_sup_on_ball(f, cfg.L + dg_lip)
    xq, wq = np.polynomial.legendre.leggauss(quad_points)
    data_term = np.zeros(n + 1)
    for i in range(1, n + 1):
        a, b = traj.times[i - 1], traj.times[i]
        acc = 0.0
        for xk, wk in zip(xq, wq):
            t = 0.5 * (b - a) * (xk + 1) + a
            d = mesh.interpolate(lambda x: data.dt_g(x, t))
            gr = np.linalg.norm(mesh.element_gradients(d), axis=1)
            acc += 0.5 * (b - a) * wk * (0.5 * float(d @ (M @ d)) + K * float(area @ gr))
        data_term[i] = acc
    lhs = en + np.cumsum(inc)
    rhs = en[0] + np.cumsum(data_term)
    slack = rhs - lhs
    k = int(np.argmin(slack))
    rows = np.column_stack([np.arange(n + 1), en, inc, data_term, slack])
    rep = EnergyReport(rows, lhs, rhs, K, float(slack[k]), k)
    if raise_on_violation and slack[k] < -tol:
        raise EstimateViolated(k, float(slack[k]))
    return rep


def vi_residual(traj: Trajectory, v: TimeSeriesField, tau: float, cfg: SolverConfig,
                boundary_tol: float = 1e-8, discrete: bool = True) -> float:
    """rhs - lhs of the variational inequality on [0, tau] for the comparison map v.

    u is the piecewise-constant trajectory and v is piecewise linear in time on its
    grid, extended by v(0) to negative times. With discrete=True the time derivative
    of v is the backward quotient (v(t) - v(t-h))/h and the endpoint terms are the
    averages of |v - u|^2 over [tau-h, tau] and [-h, 0]; per-step minimality makes
    this form nonnegative at every h. discrete=False uses dt v and the pointwise
    endpoint terms, which u^(h) satisfies only up to O(h)."""
    mesh, f, data = cfg.mesh, cfg.integrand, cfg.data
    M = mesh.mass_matrix
    bd = mesh.boundary_vertices
    xb = mesh.vertices[bd]
    for t, vals in zip(v.times, v.values):
        gb = data.g(xb, t)
        if np.max(np.abs(vals[bd] - gb)) > boundary_tol * max(1.0, np.max(np.abs(gb))):
            raise BoundaryMismatch(f"comparison map differs from the boundary data at t={t:.6g}")
    if tau < 0 or tau > v.times[-1] * (1 + 1e-12) or tau > traj.times[-1] * (1 + 1e-12):
        raise GridMismatch("tau outside the comparison map and trajectory time ranges")
    h = traj.h
    g0 = mesh.interpolate(lambda x: data.g(x, 0.0))
    u0 = traj.steps[0]
    ip = lambda a, b: float(a @ (M @ b))
    vv = lambda t: _interp_rows(v.times, v.values, max(t, 0.0))

    def u_at(t):
        return u0 if t <= 0 else traj.steps[traj.step_index(t)]

    def e_at(t):
        return traj.energies[0] if t <= 0 else traj.energies[traj.step_index(t)]

    d0 = v.values[0] - g0
    if not discrete:
        val = 0.5 * ip(d0, d0)
        nodes = np.unique(np.concatenate([v.times[v.times < tau], traj.times[traj.times < tau], [0.0, tau]]))
        for a, b in zip(nodes[:-1], nodes[1:]):
            va, vb = vv(a), vv(b)
            u = u_at(0.5 * (a + b))
            val += ip(vb - va, 0.5 * (va + vb) - u)
            val += 0.5 * (b - a) * (energy(mesh, f, va) + energy(mesh, f, vb))
            val -= (b - a) * e_at(0.5 * (a + b))
        dt_ = vv(tau) - traj.piecewise_constant(tau)
        return float(val - 0.5 * ip(dt_, dt_))

    # admissible shift v + I(g^(h) - g): boundary values frozen at the step's right end
    gi = lambda t: mesh.interpolate(lambda x: data.g(x, t))

    def vh(t, i):
        if t <= 0:
            return v.values[0]
        return vv(t) - gi(t) + gi(traj.times[i])

    # [-h, 0] average, with u = u_0 and v = v(0) there
    val = 0.5 * ip(d0, d0)
    cut = [0.0, tau, tau - h]
    nodes = np.concatenate([v.times, v.times + h, traj.times, cut])
    nodes = np.unique(nodes[(nodes >= 0) & (nodes <= tau)])
    nodes = nodes[np.concatenate([[True], np.diff(nodes) > 1e-12 * max(1.0, tau)])]
    if tau - h < 0:
        # the window [tau-h, tau] reaches into negative times
        dn = v.values[0] - u0
        val -= (h - tau) / (2 * h) * ip(dn, dn)
    for a, b in zip(nodes[:-1], nodes[1:]):
        m = 0.5 * (a + b)
        i = traj.step_index(m)
        j = traj.step_index(m - h) if m > h else 0
        u = traj.steps[i]
        cur = [vh(a, i), vh(m, i), vh(b, i)]
        pre = [vh(a - h, j), vh(m - h, j), vh(b - h, j)]
        # Simpson is exact for the quadratic-in-time products
        w = ((b - a) / 6) * np.array([1.0, 4.0, 1.0])
        val += sum(wk * ip(x - u, x - y) for wk, x, y in zip(w, cur, pre)) / h
        # trapezoid on a convex-in-time integrand bounds its integral from above
        val += 0.5 * (b - a) * (energy(mesh, f, cur[0]) + energy(mesh, f, cur[2]))
        val -= (b - a) * traj.energies[i]
        if a >= tau - h - 1e-12 * max(1.0, tau):
            val -= sum(wk * ip(x - u, x - u) for wk, x in zip(w, cur)) / (2 * h)
    return float(val)


def _interp_rows(times, values, t):
    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
    w = (t - times[k]) / (times[k + 1] - times[k])
    return (1 - w) * values[k] + w * values[k + 1]


def initial_attainment(traj: Trajectory, data: BoundaryDatum | None = None, delta: float | None = None,
                       quad_points: int = 8) -> float:
    """(1/delta) int_0^delta |I g(t) - u^(h)(t)|^2_M dt with delta = 4h by default."""
    data = data if data is not None else traj.config.data
    mesh = traj.mesh
    M = mesh.mass_matrix
    delta = 4 * traj.h if delta is None else delta
    xq, wq = np.polynomial.legendre.leggauss(quad_points)
    acc = 0.0
    edges = np.unique(np.concatenate([traj.times[traj.times < delta], [delta]]))
    for a, b in zip(edges[:-1], edges[1:]):
        u = traj.piecewise_constant(b)
        for xk, wk in zip(xq, wq):
            t = 0.5 * (b - a) * (xk + 1) + a
            d = mesh.interpolate(lambda x: data.g(x, t)) - u
            acc += 0.5 * (b - a) * wk * float(d @ (M @ d))
    return acc / delta


@dataclass
class InvariantReport:
    minimality_slack: float     # min over checked steps of objective(comparison) - objective(u_i)
    minimality_checked: int     # steps whose comparison u_{i-1} + g_i - g_{i-1} is feasible
    max_lipschitz: float
    sup_bound_slack: float      # min over i of bound - (|u_i|_inf + |grad u_i|_inf)
    passed: bool


def trajectory_invariants(traj: Trajectory, cfg: SolverConfig, tol: float | None = None) -> InvariantReport:
    mesh, f, data, h = cfg.mesh, cfg.integrand, cfg.data, cfg.h
    tol = 10 * cfg.inner_tol if tol is None else tol
    G = np.array([mesh.interpolate(lambda x, t=t: data.g(x, t)) for t in traj.times])
    diam = float(np.max(pdist(mesh.vertices[mesh.boundary_vertices])))
    bound = float(np.max(np.abs(G))) + cfg.L * (1 + 2 * diam)
    min_slack, checked = np.inf, 0
    for i in range(1, len(traj.steps)):
        comp = traj.steps[i - 1] + G[i] - G[i - 1]
        if discrete_lipschitz(comp, mesh) <= cfg.L:
            checked += 1
            prev = traj.steps[i - 1]
            d = step_objective(mesh, f, h, prev, comp) - step_objective(mesh, f, h, prev, traj.steps[i])
            min_slack = min(min_slack, d)
    lips = np.array([discrete_lipschitz(u, mesh) for u in traj.steps])
    sups = np.array([np.max(np.abs(u)) for u in traj.steps]) + lips
    sup_slack = float(np.min(bound - sups))
    ok = (min_slack >= -tol) and lips.max() <= cfg.L + 1e-8 and sup_slack >= 0
    return InvariantReport(float(min_slack), checked, float(lips.max()), sup_slack, bool(ok))
