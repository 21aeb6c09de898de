"""Discrete comparison/maximum principles and the barrier-based Lipschitz certificate."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np

from . import barrier as bar
from .boundary import BoundaryDatum, certify_tbsc, widen_slopes
from .geometry import ConvexDomain, discrete_lipschitz
from .integrand import ConvexIntegrand
from .solver import GridMismatch, Trajectory

DEFAULT_INNER_TOL = 1e-10


def _tolerance(traj: Trajectory):
    inner = traj.config.inner_tol if traj.config is not None else DEFAULT_INNER_TOL
    return 1e-6 + 10 * inner


def _check_grid(a: Trajectory, b: Trajectory):
    if a.mesh is not b.mesh:
        same = (a.mesh.vertices.shape == b.mesh.vertices.shape
                and np.array_equal(a.mesh.vertices, b.mesh.vertices)
                and np.array_equal(a.mesh.simplices, b.mesh.simplices))
        if not same:
            raise GridMismatch("trajectories live on different meshes")
    if a.times.shape != b.times.shape or np.max(np.abs(a.times - b.times)) > 1e-12:
        raise GridMismatch("trajectories use different time grids")


@dataclass
class ComparisonReport:
    max_violation: float
    tolerance: float
    passed: bool


def comparison_test(traj_sub: Trajectory, traj_super: Trajectory, tolerance: float | None = None) -> ComparisonReport:
    """max over nodes and steps of u_sub - u_super."""
    _check_grid(traj_sub, traj_super)
    tol = _tolerance(traj_sub) if tolerance is None else tolerance
    viol = float(np.max(traj_sub.steps - traj_super.steps))
    return ComparisonReport(viol, tol, viol <= tol)


@dataclass
class MaxPrincipleReport:
    interior_sup: float
    boundary_sup: float
    tolerance: float
    passed: bool


def max_principle_test(traj_a: Trajectory, traj_b: Trajectory, tolerance: float | None = None) -> MaxPrincipleReport:
    """Sup of u_a - u_b over interior nodes at positive times against the sup
    over the parabolic boundary (all nodes at t = 0, boundary nodes after)."""
    _check_grid(traj_a, traj_b)
    tol = _tolerance(traj_a) if tolerance is None else tolerance
    d = traj_a.steps - traj_b.steps
    mesh = traj_a.mesh
    bsup = float(max(np.max(d[0]), np.max(d[1:, mesh.boundary_vertices]) if len(d) > 1 else -np.inf))
    isup = float(np.max(d[1:, mesh.interior_vertices])) if len(d) > 1 else -np.inf
    return MaxPrincipleReport(isup, bsup, tol, isup <= bsup + tol)


@dataclass
class BarrierSample:
    x_o: np.ndarray
    lower: bar.Barrier
    upper: bar.Barrier
    lower_lip: float
    upper_lip: float

    @property
    def budget(self):
        return max(self.lower_lip, self.upper_lip)


def sampled_barriers(f: ConvexIntegrand, dom: ConvexDomain, data: BoundaryDatum, n_points: int = 16,
                     alpha: float | None = None, explicit: bool = False, space_samples: int = 64,
                     time_samples: int = 64) -> list:
    """Lower/upper barrier pairs at n_points boundary points.

    explicit=True uses the closed-form disk construction at +-alpha (alpha
    defaults to 2); otherwise the parameter search runs at +-alpha, with alpha
    defaulting to the threshold alpha_min.  The Lipschitz budget of each
    barrier is its sampled sup |grad v| over the closed domain."""
    _, pts = dom.boundary_samples(n_points)
    out = []
    for x_o in pts:
        cert = widen_slopes(certify_tbsc(data, dom, x_o), data, dom)
        if explicit:
            a = 2.0 if alpha is None else abs(alpha)
            lo = bar.explicit_disk_barrier(f, dom, data, cert, a)
            up = bar.explicit_disk_barrier(f, dom, data, cert, -a)
        else:
            a = bar.alpha_min(f, dom, data, cert) if alpha is None else abs(alpha)
            lo = bar.build(f, dom, data, cert, a)
            up = bar.build(f, dom, data, cert, -a)
        lips = [_sampled_lip(b, dom, data, space_samples, time_samples) for b in (lo, up)]
        out.append(BarrierSample(x_o, lo, up, *lips))
    return out


def _sampled_lip(b, dom, data, space_samples, time_samples):
    inner = bar.spiral_points(dom, space_samples)
    _, bdp = dom.boundary_samples(space_samples)
    pts = np.vstack([inner, bdp])
    return max(float(np.max(np.linalg.norm(b.grad(pts, t), axis=1)))
               for t in np.linspace(0.0, data.T, time_samples))


@dataclass
class LipschitzCertificate:
    computed_C: float
    bound: float
    barrier_budget: float
    initial_gradient: float
    L: float
    constraint_active: bool
    within_bound: bool


def lipschitz_certificate(traj: Trajectory, barriers: list, data: BoundaryDatum, dom: ConvexDomain | None = None,
                          L: float | None = None, tol: float = 1e-6, slack: float = 0.1) -> LipschitzCertificate:
    """computed_C = max_i Lip(u_i); bound = max{max budget, sup |grad g_o|}.

    within_bound allows a relative discretization slack."""
    if L is None:
        L = traj.config.L
    C = max(discrete_lipschitz(u, traj.mesh) for u in traj.steps)
    budget = max((b.budget for b in barriers), default=0.0)
    if dom is not None:
        pts = dom.sample_points(16, 64)
        g0 = float(np.max(np.linalg.norm(data.gradient(pts, 0.0), axis=1)))
    else:
        g0 = discrete_lipschitz(traj.mesh.interpolate(data.g0), traj.mesh)
    bound = max(budget, g0)
    return LipschitzCertificate(C, bound, budget, g0, float(L), bool(C >= L - tol), bool(C <= (1 + slack) * bound))


@dataclass
class HolderReport:
    space_lip: float
    time_half_holder: float


def holder_quotient(traj: Trajectory) -> HolderReport:
    """Diagnostic: max |u_i - u_j| / |t_i - t_j|^(1/2) over step pairs and max spatial Lipschitz."""
    U, t = traj.steps, traj.times
    q = 0.0
    for i in range(len(t) - 1):
        diff = np.max(np.abs(U[i + 1:] - U[i]), axis=1)
        q = max(q, float(np.max(diff / np.sqrt(t[i + 1:] - t[i]))))
    lip = max(discrete_lipschitz(u, traj.mesh) for u in U)
    return HolderReport(lip, q)


def append_csv_row(report, path, name: str):
    """Append a report as a single CSV row: check name, then key=value cells."""
    cells = [name]
    for k, v in asdict(report).items():
        if isinstance(v, (bool, np.bool_)):
            cells.append(f"{k}={bool(v)}")
        elif isinstance(v, (float, np.floating)):
            cells.append(f"{k}=%.17g" % v)
        elif isinstance(v, (int, np.integer, str)):
            cells.append(f"{k}={v}")
    with open(path, "a", newline="") as fh:
        csv.writer(fh).writerow(cells)
