"""Independent reference solvers used as test oracles.

These assemble their own P1 matrices from raw vertex/triangle arrays (edge
formulas, no shared code with Mesh) so that agreement with the main solver is
a genuine cross-check.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize


def assemble_p1(vertices, triangles):
    """Stiffness and consistent mass matrices from edge vectors."""
    vertices = np.asarray(vertices, float)
    rows, cols, kv, mv = [], [], [], []
    for tri in triangles:
        p = vertices[tri]
        # edge opposite vertex k
        e = np.array([p[2] - p[1], p[0] - p[2], p[1] - p[0]])
        area = 0.5 * abs(e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0])
        K_loc = (e @ e.T) / (4.0 * area)
        M_loc = area / 12.0 * (np.ones((3, 3)) + np.eye(3))
        for a in range(3):
            for b in range(3):
                rows.append(tri[a])
                cols.append(tri[b])
                kv.append(K_loc[a, b])
                mv.append(M_loc[a, b])
    n = len(vertices)
    K = sp.coo_matrix((kv, (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((mv, (rows, cols)), shape=(n, n)).tocsr()
    return K, M


def element_gradient_rows(vertices, triangles):
    """Dense (2E, N) matrix: rows 2e, 2e+1 give the gradient on triangle e."""
    vertices = np.asarray(vertices, float)
    E, N = len(triangles), len(vertices)
    G = np.zeros((2 * E, N))
    for k, tri in enumerate(triangles):
        p = vertices[tri]
        e = np.array([p[2] - p[1], p[0] - p[2], p[1] - p[0]])
        area2 = e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0]
        # grad of hat function a is the inward-rotated opposite edge over twice the signed area
        for a in range(3):
            G[2 * k, tri[a]] = -e[a, 1] / area2
            G[2 * k + 1, tri[a]] = e[a, 0] / area2
    return G


def crank_nicolson(vertices, triangles, boundary, g, T, dt):
    """Heat equation u_t = Lap u with Dirichlet data g(x,t); returns (times, U)."""
    K, M = assemble_p1(vertices, triangles)
    n = len(vertices)
    bd = np.asarray(boundary)
    free = np.setdiff1d(np.arange(n), bd)
    steps = int(round(T / dt))
    A = (M + 0.5 * dt * K).tocsr()
    Bm = (M - 0.5 * dt * K).tocsr()
    A_ff = A[free][:, free].tocsc()
    A_fb = A[free][:, bd]
    B_ff = Bm[free][:, free]
    B_fb = Bm[free][:, bd]
    lu = spla.splu(A_ff)
    x = np.asarray(vertices, float)
    u = g(x, 0.0).astype(float)
    U = [u.copy()]
    times = dt * np.arange(steps + 1)
    for k in range(steps):
        gb_old = u[bd]
        gb_new = g(x[bd], times[k + 1])
        rhs = B_ff @ u[free] + B_fb @ gb_old - A_fb @ gb_new
        u = u.copy()
        u[free] = lu.solve(rhs)
        u[bd] = gb_new
        U.append(u.copy())
    return times, np.array(U)


def implicit_euler_step(vertices, triangles, boundary, u_prev, g_nodes, h):
    """Direct solve of (M + hK) v = M u_prev on interior nodes, v = g on the boundary."""
    K, M = assemble_p1(vertices, triangles)
    n = len(vertices)
    bd = np.asarray(boundary)
    free = np.setdiff1d(np.arange(n), bd)
    A = (M + h * K).tocsr()
    rhs = (M @ u_prev)[free] - A[free][:, bd] @ g_nodes[bd]
    v = np.array(g_nodes, float)
    v[free] = spla.spsolve(A[free][:, free].tocsc(), rhs)
    return v


def dense_constrained_step(vertices, triangles, boundary, u_prev, g_nodes, h, L, x0=None):
    """Quadratic integrand step by SLSQP (sequential quadratic programming with an
    active-set subproblem) on the dense discretization; returns (v, objective)."""
    K, M = assemble_p1(vertices, triangles)
    K, M = K.toarray(), M.toarray()
    G = element_gradient_rows(vertices, triangles)
    n = len(vertices)
    bd = np.asarray(boundary)
    free = np.setdiff1d(np.arange(n), bd)
    base = np.array(g_nodes, float)
    base[free] = 0.0
    up = np.asarray(u_prev, float)

    def full(z):
        v = base.copy()
        v[free] = z
        return v

    def obj(z):
        v = full(z)
        d = v - up
        return 0.5 * v @ K @ v + d @ M @ d / (2 * h)

    def jac(z):
        v = full(z)
        return (K @ v + M @ (v - up) / h)[free]

    Gf = G[:, free]
    Gb = G @ base
    E = len(triangles)

    def cons(z):
        gr = (Gb + Gf @ z).reshape(E, 2)
        return L**2 - np.sum(gr**2, axis=1)

    def cons_jac(z):
        gr = (Gb + Gf @ z).reshape(E, 2)
        J = -2 * (gr[:, :1] * Gf[0::2] + gr[:, 1:] * Gf[1::2])
        return J

    # start from the boundary interpolant, which is feasible
    z0 = np.asarray(g_nodes, float)[free] if x0 is None else x0
    res = minimize(obj, z0, jac=jac, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
                   options={"ftol": 1e-15, "maxiter": 2000})
    v = full(res.x)
    return v, float(obj(res.x)), res
