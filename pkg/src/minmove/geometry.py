"""Convex planar domains, the R-uniform convexity check, and P1 meshes."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.spatial import Delaunay

Array = np.ndarray


class MeshFailure(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ConvexDomain:
    """A bounded convex domain given by a boundary parametrization on [0, 2pi)."""

    name: str
    boundary: Callable[[Array], Array]          # theta -> points (..., 2)
    normal_at: Callable[[Array], Array]         # theta -> outward unit normals
    param_of: Callable[[Array], Array]          # boundary point -> theta
    contains: Callable[[Array], Array]
    R: float
    diam: float
    center: Array
    area: float

    def normal(self, x):
        """Outward unit normal at boundary point(s) x."""
        return self.normal_at(self.param_of(np.asarray(x, float)))

    def boundary_samples(self, n: int, offset: float = 0.0):
        theta = 2 * np.pi * (np.arange(n) + offset) / n
        return theta, self.boundary(theta)

    def sample_points(self, n_radial: int = 16, n_angular: int = 64):
        """Points of the closure: boundary curve scaled toward the center."""
        theta = 2 * np.pi * np.arange(n_angular) / n_angular
        bd = self.boundary(theta)
        s = np.linspace(0.0, 1.0, n_radial + 1)[1:]
        pts = self.center + s[:, None, None] * (bd - self.center)[None]
        return np.vstack([self.center[None], pts.reshape(-1, 2)])


def disk(radius: float = 1.0, center=(0.0, 0.0), R: float | None = None) -> ConvexDomain:
    c = np.asarray(center, float)

    def bd(theta):
        theta = np.asarray(theta, float)
        return c + radius * np.stack([np.cos(theta), np.sin(theta)], -1)

    def nrm(theta):
        theta = np.asarray(theta, float)
        return np.stack([np.cos(theta), np.sin(theta)], -1)

    def par(x):
        d = np.asarray(x, float) - c
        return np.mod(np.arctan2(d[..., 1], d[..., 0]), 2 * np.pi)

    return ConvexDomain(
        name="disk", boundary=bd, normal_at=nrm, param_of=par,
        contains=lambda x: np.linalg.norm(np.asarray(x, float) - c, axis=-1) <= radius * (1 + 1e-12),
        R=float(radius if R is None else R), diam=2.0 * radius, center=c, area=np.pi * radius**2,
    )


def ellipse(a: float, b: float, center=(0.0, 0.0), R: float | None = None) -> ConvexDomain:
    """Ellipse with semi-axes a (x1) and b (x2). The smallest radius for which the
    uniform convexity inequality holds is the largest curvature radius max(a,b)^2/min(a,b)."""
    c = np.asarray(center, float)

    def bd(theta):
        theta = np.asarray(theta, float)
        return c + np.stack([a * np.cos(theta), b * np.sin(theta)], -1)

    def nrm(theta):
        theta = np.asarray(theta, float)
        v = np.stack([b * np.cos(theta), a * np.sin(theta)], -1)
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def par(x):
        d = np.asarray(x, float) - c
        return np.mod(np.arctan2(d[..., 1] / b, d[..., 0] / a), 2 * np.pi)

    def contains(x):
        d = np.asarray(x, float) - c
        return (d[..., 0] / a) ** 2 + (d[..., 1] / b) ** 2 <= 1 + 1e-12

    if R is None:
        R = max(a, b) ** 2 / min(a, b)
    # Ramanujan's perimeter is not needed; area is exact
    return ConvexDomain("ellipse", bd, nrm, par, contains, float(R), 2.0 * max(a, b), c, np.pi * a * b)


def square(side: float = 2.0, center=(0.0, 0.0), R: float = 1.0) -> ConvexDomain:
    """Axis-aligned square, parametrized by angle. Convex but not uniformly convex."""
    c = np.asarray(center, float)
    half = side / 2.0

    def bd(theta):
        theta = np.asarray(theta, float)
        d = np.stack([np.cos(theta), np.sin(theta)], -1)
        scale = half / np.max(np.abs(d), axis=-1, keepdims=True)
        return c + scale * d

    def nrm(theta):
        theta = np.asarray(theta, float)
        d = np.stack([np.cos(theta), np.sin(theta)], -1)
        k = np.argmax(np.abs(d), axis=-1)
        out = np.zeros_like(d)
        np.put_along_axis(out, k[..., None], np.take_along_axis(np.sign(d), k[..., None], -1), -1)
        return out

    def par(x):
        d = np.asarray(x, float) - c
        return np.mod(np.arctan2(d[..., 1], d[..., 0]), 2 * np.pi)

    def contains(x):
        d = np.asarray(x, float) - c
        return np.max(np.abs(d), axis=-1) <= half * (1 + 1e-12)

    return ConvexDomain("square", bd, nrm, par, contains, float(R), side * np.sqrt(2.0), c, side**2)


def by_name(kind: str, **params) -> ConvexDomain:
    if kind == "disk":
        return disk(**params)
    if kind == "ellipse":
        return ellipse(**params)
    if kind == "square":
        return square(**params)
    raise ValueError(f"unknown domain kind {kind!r}")


# ------------------------------------------------------- convexity check

@dataclass
class DomainReport:
    worst_slack: float
    worst_pair: tuple
    passed: bool


def check_domain(dom: ConvexDomain, n_samples: int = 512, tol: float = 1e-8) -> DomainReport:
    """Max over sampled boundary pairs of R nu(x_o).(x - x_o) + |x - x_o|^2 / 2."""
    theta, pts = dom.boundary_samples(n_samples, offset=0.25)
    nu = dom.normal_at(theta)
    diff = pts[None, :, :] - pts[:, None, :]                  # [o, x]
    slack = dom.R * np.einsum("ok,oxk->ox", nu, diff) + 0.5 * np.sum(diff**2, -1)
    k = np.unravel_index(np.argmax(slack), slack.shape)
    worst = float(slack[k])
    return DomainReport(worst, (pts[k[0]], pts[k[1]]), worst <= tol)


# ----------------------------------------------------------------- mesh

@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: Array          # (N, 2)
    simplices: Array         # (E, 3)
    boundary_vertices: Array  # sorted indices

    @cached_property
    def element_measures(self) -> Array:
        p = self.vertices[self.simplices]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def gradient_operators(self) -> Array:
        """(E, 2, 3): grad of the P1 interpolant on element e is G[e] @ u[simplex e]."""
        p = self.vertices[self.simplices]
        # rows of inv([[1,x,y]...]) give barycentric coefficients
        A = np.concatenate([np.ones((len(p), 3, 1)), p], axis=2)
        return np.linalg.inv(A)[:, 1:, :]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @cached_property
    def interior_vertices(self) -> Array:
        mask = np.ones(self.n_vertices, bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    @cached_property
    def grad_matrices(self):
        """Sparse (E, N) matrices (Gx, Gy) mapping nodal values to element gradients."""
        E = len(self.simplices)
        rows = np.repeat(np.arange(E), 3)
        cols = self.simplices.ravel()
        G = self.gradient_operators
        Gx = sp.csr_matrix((G[:, 0, :].ravel(), (rows, cols)), shape=(E, self.n_vertices))
        Gy = sp.csr_matrix((G[:, 1, :].ravel(), (rows, cols)), shape=(E, self.n_vertices))
        return Gx, Gy

    @cached_property
    def mass_matrix(self):
        """Consistent P1 mass matrix."""
        local = (np.ones((3, 3)) + np.eye(3)) / 12.0
        vals = self.element_measures[:, None, None] * local[None]
        rows = np.repeat(self.simplices, 3, axis=1).ravel()
        cols = np.tile(self.simplices, (1, 3)).ravel()
        return sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(self.n_vertices,) * 2)

    @cached_property
    def stiffness_matrix(self):
        Gx, Gy = self.grad_matrices
        W = sp.diags(self.element_measures)
        return (Gx.T @ W @ Gx + Gy.T @ W @ Gy).tocsr()

    def element_gradients(self, u) -> Array:
        u = np.asarray(u, float)
        return np.einsum("eij,ej->ei", self.gradient_operators, u[self.simplices])

    def interpolate(self, fn) -> Array:
        return np.asarray(fn(self.vertices), float)

    def l2_norm(self, u) -> float:
        u = np.asarray(u, float)
        return float(np.sqrt(u @ (self.mass_matrix @ u)))

    def angles(self) -> Array:
        p = self.vertices[self.simplices]
        out = np.empty((len(p), 3))
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cosang = np.sum(a * b, 1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            out[:, k] = np.arccos(np.clip(cosang, -1, 1))
        return np.degrees(out)

    def edge_lengths(self) -> Array:
        p = self.vertices[self.simplices]
        return np.stack([np.linalg.norm(p[:, (k + 1) % 3] - p[:, k], axis=1) for k in range(3)], 1)

    def coloring(self):
        """Greedy partition of elements into groups sharing no vertex."""
        return _vertex_disjoint_coloring(self.simplices, self.n_vertices)


def _vertex_disjoint_coloring(simplices, n_vertices):
    colors = np.full(len(simplices), -1)
    # vertex -> set of colors already used by incident elements
    used = [set() for _ in range(n_vertices)]
    for e, tri in enumerate(simplices):
        taken = used[tri[0]] | used[tri[1]] | used[tri[2]]
        c = 0
        while c in taken:
            c += 1
        colors[e] = c
        for v in tri:
            used[v].add(c)
    return [np.flatnonzero(colors == c) for c in range(colors.max() + 1)]


def _arc_length_params(dom: ConvexDomain, n_fine: int = 8192):
    theta = np.linspace(0.0, 2 * np.pi, n_fine + 1)
    pts = dom.boundary(theta)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    return theta, s


def mesh_domain(dom: ConvexDomain, target_edge: float, seed: int | None = None,
                smoothing_iters: int = 8, min_angle: float = 15.0) -> Mesh:
    """Inscribed-polygon mesh: arc-length boundary nodes, hexagonal interior
    lattice, Delaunay triangulation and Laplacian smoothing."""
    if not (0 < target_edge < dom.diam / 4):
        raise MeshFailure(f"target_edge {target_edge} must lie in (0, diam/4 = {dom.diam / 4})")
    theta_f, s_f = _arc_length_params(dom)
    perimeter = s_f[-1]
    nb = max(8, int(np.ceil(perimeter / target_edge)))
    theta_b = np.interp(perimeter * np.arange(nb) / nb, s_f, theta_f)
    bpts = dom.boundary(theta_b)

    h = target_edge
    lo = dom.center - dom.diam
    nx = int(np.ceil(2 * dom.diam / h)) + 1
    ny = int(np.ceil(2 * dom.diam / (h * np.sqrt(3) / 2))) + 1
    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    lat = np.stack([lo[0] + h * (ii + 0.5 * (jj % 2)), lo[1] + h * np.sqrt(3) / 2 * jj], -1).reshape(-1, 2)
    if seed is not None:
        rng = np.random.default_rng(seed)
        lat = lat + 0.1 * h * rng.uniform(-1, 1, lat.shape)
    lat = lat[dom.contains(lat)]
    # keep lattice points well away from the boundary polygon
    dense = dom.boundary(theta_f[:-1:2])
    dist = np.min(np.linalg.norm(lat[:, None, :] - dense[None, :, :], axis=2), axis=1) if len(lat) else lat
    interior = lat[dist > 0.6 * h]

    verts = np.vstack([bpts, interior])
    nbd = len(bpts)
    for _ in range(4):
        tri = Delaunay(verts).simplices
        for _ in range(smoothing_iters):
            nbrs = _neighbour_average(tri, verts)
            verts[nbd:] = nbrs[nbd:]
            tri = Delaunay(verts).simplices
        # split over-long edges by inserting their midpoints, then re-smooth
        e = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
        e = np.unique(e, axis=0)
        long = np.linalg.norm(verts[e[:, 0]] - verts[e[:, 1]], axis=1) > 1.4 * h
        if not long.any():
            break
        verts = np.vstack([verts, 0.5 * (verts[e[long, 0]] + verts[e[long, 1]])])

    tri = _orient(verts, tri)
    area = _areas(verts, tri)
    tri = tri[area > 1e-12 * h * h]
    mesh = Mesh(verts, tri, np.arange(nbd))
    worst = float(mesh.angles().min())
    if worst < min_angle:
        raise MeshFailure(f"minimum angle {worst:.2f} deg below {min_angle} deg")
    return mesh


def _neighbour_average(tri, verts):
    n = len(verts)
    rows = np.concatenate([tri[:, [0, 1, 2]].ravel(), tri[:, [1, 2, 0]].ravel()])
    cols = np.concatenate([tri[:, [1, 2, 0]].ravel(), tri[:, [0, 1, 2]].ravel()])
    A = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    A.data[:] = 1.0  # collapse duplicate edges
    deg = np.asarray(A.sum(axis=1)).ravel()
    return (A @ verts) / deg[:, None]


def _areas(verts, tri):
    p = verts[tri]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _orient(verts, tri):
    tri = tri.copy()
    neg = _areas(verts, tri) < 0
    tri[neg] = tri[neg][:, [0, 2, 1]]
    return tri


def single_triangle_mesh() -> Mesh:
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return Mesh(verts, np.array([[0, 1, 2]]), np.arange(3))


def discrete_lipschitz(field, mesh: Mesh) -> float:
    """Largest element gradient norm of the P1 interpolant."""
    g = mesh.element_gradients(field)
    return float(np.max(np.linalg.norm(g, axis=1))) if len(g) else 0.0


def write_mesh(mesh: Mesh, prefix: str):
    np.savetxt(f"{prefix}_vertices.txt", mesh.vertices, fmt="%.17g", header="x1 x2")
    np.savetxt(f"{prefix}_simplices.txt", mesh.simplices, fmt="%d", header="v0 v1 v2")
    np.savetxt(f"{prefix}_boundary.txt", mesh.boundary_vertices, fmt="%d", header="vertex")
