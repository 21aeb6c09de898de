"""Acceptance criteria 1-10, one test each; the terminal summary prints a PASS/FAIL line per criterion."""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from minmove import barrier as Bar, boundary as B, geometry as G, integrand as I
from minmove import mollify as Mo, reference as R, solver as S, verify as V
from minmove.mollify import TimeSeriesField

DISK = G.disk()
XO = np.array([-1.0, 0.0])
QUAD = I.quadratic()
EPS = np.finfo(float).eps


def record(k, checks, elapsed, budget):
    """checks: list of (label, value, tol, ok)."""
    ok = all(c[3] for c in checks) and elapsed < budget
    parts = [f"{lab} {val:.3g} vs {tol}" for lab, val, tol, _ in checks]
    parts.append(f"time {elapsed:.1f}s vs {budget:g}s")
    ACCEPTANCE.append((k, ok, "; ".join(parts)))
    return ok


def le(label, val, tol):
    return (label, float(val), tol, bool(val <= tol))


def ge(label, val, tol):
    return (label, float(val), f">= {tol}", bool(val >= tol))


@pytest.fixture(scope="module")
def rot_cert():
    data = B.rotating_affine(np.pi)
    return data, B.widen_slopes(B.certify_tbsc(data, DISK, XO), data, DISK)


@pytest.fixture(scope="module")
def heat_run():
    """The criterion-3 run: mesh edge 0.05, h = pi/128, L = 4, T = pi/2."""
    t0 = time.perf_counter()
    mesh = G.mesh_domain(DISK, 0.05)
    data = B.rotating_affine(np.pi / 2)
    cfg = S.SolverConfig(h=np.pi / 128, L=4.0, mesh=mesh, integrand=QUAD, data=data)
    traj = S.solve(cfg)
    return cfg, traj, time.perf_counter() - t0


def test_criterion_1_explicit_disk_barrier(rot_cert):
    t0 = time.perf_counter()
    data, cert = rot_cert
    b = Bar.explicit_disk_barrier(QUAD, DISK, data, cert, 2.0)
    ts = np.linspace(0, np.pi, 128)
    # closed forms at alpha = 2: y = (1 - cos t, -sin t), c = alpha/4 + 1 + (2/alpha)(1 - cos t)
    y_err = max(np.max(np.abs(b.y(t) - np.array([1 - np.cos(t), -np.sin(t)]))) for t in ts)
    c_err = max(abs(b.c(t) - (0.5 + 1 + (1 - np.cos(t)))) for t in ts)
    th = 2 * np.pi * np.arange(256) / 256
    ball = np.array([1.0, 0.0]) + 2 * np.column_stack([np.cos(th), np.sin(th)])
    ball_err = max(np.max(np.abs(Bar.sublevel_function(b, ball, t))) for t in np.linspace(0, np.pi, 17))
    rep = Bar.verify(b, QUAD, DISK, data, space_samples=64, time_samples=128)
    checks = [le("y", y_err, 16 * EPS), le("c", c_err, 16 * EPS * 3), le("ball", ball_err, 1e-9),
              le("pin", rep.pin_err, 1e-12), le("order", rep.ordering_viol, 1e-10),
              le("subsol", rep.subsol_viol, 1e-8), le("lip", rep.lip_const, 3.0)]
    assert record(1, checks, time.perf_counter() - t0, 5.0), checks


def test_criterion_2_below_threshold(rot_cert):
    t0 = time.perf_counter()
    data, cert = rot_cert
    rep = Bar.verify(Bar.explicit_disk_barrier(QUAD, DISK, data, cert, 0.5), QUAD, DISK, data)
    checks = [("subsol", rep.subsol_viol, "> 0.4", rep.subsol_viol > 0.4)]
    assert record(2, checks, time.perf_counter() - t0, 5.0), checks


def test_criterion_3_heat_oracle(heat_run):
    t0 = time.perf_counter()
    cfg, traj, t_solve = heat_run
    mesh, data, h = cfg.mesh, cfg.data, cfg.h
    times, U = R.crank_nicolson(mesh.vertices, mesh.simplices, mesh.boundary_vertices, data.g, data.T, h / 8)
    ref = U[::8]
    assert np.allclose(times[::8], traj.times)
    _, M = R.assemble_p1(mesh.vertices, mesh.simplices)
    d = traj.steps[1:] - ref[1:]
    num = np.sum(np.einsum("ij,ij->i", d, (M @ d.T).T)) * h
    den = np.sum(np.einsum("ij,ij->i", ref[1:], (M @ ref[1:].T).T)) * h
    err = np.sqrt(num / den)
    checks = [le("rel L2 error", err, 0.05)]
    assert record(3, checks, t_solve + time.perf_counter() - t0, 120.0), checks


def test_criterion_4_energy_estimate(heat_run):
    t0 = time.perf_counter()
    cfg, traj, _ = heat_run
    rep = S.energy_report(traj, cfg, raise_on_violation=False)
    checks = [ge("worst slack", rep.worst_slack, -1e-7)]
    assert record(4, checks, time.perf_counter() - t0, 120.0), checks


def test_criterion_5_dense_oracle():
    t0 = time.perf_counter()
    mesh = G.mesh_domain(DISK, 0.45)
    data = B.rotating_affine(np.pi)
    h, L = np.pi / 64, 1.2
    cfg = S.SolverConfig(h=h, L=L, mesh=mesh, integrand=QUAD, data=data)
    rng = np.random.default_rng(0)
    worst, lip = 0.0, 0.0
    for k in range(5):
        g = mesh.interpolate(lambda x: data.g(x, h * (k + 1)))
        up = g + rng.normal(0, 1.0, mesh.n_vertices)
        v = S.step(up, g, cfg)
        _, obr, _ = R.dense_constrained_step(mesh.vertices, mesh.simplices, mesh.boundary_vertices, up, g, h, L)
        ob = S.step_objective(mesh, QUAD, h, up, v)
        worst = max(worst, abs(ob - obr) / abs(obr))
        lip = max(lip, G.discrete_lipschitz(v, mesh))
    checks = [le("vertices", mesh.n_vertices, 40), le("rel objective gap", worst, 1e-6), le("lip", lip, L + 1e-8)]
    assert record(5, checks, time.perf_counter() - t0, 30.0), checks


def test_criterion_6_comparison_principles(heat_run):
    t0 = time.perf_counter()
    cfg, traj, _ = heat_run
    shifted = S.solve(S.SolverConfig(h=cfg.h, L=cfg.L, mesh=cfg.mesh, integrand=QUAD, data=B.shifted(cfg.data, 0.1)))
    order = V.comparison_test(traj, shifted).max_violation
    equiv = np.max(np.abs(shifted.steps - traj.steps - 0.1))
    mp = V.max_principle_test(shifted, traj)
    checks = [le("ordering", order, 1e-6), le("shift", equiv, 1e-10),
              le("interior - boundary sup", mp.interior_sup - mp.boundary_sup, 1e-6)]
    assert record(6, checks, time.perf_counter() - t0, 120.0), checks


def test_criterion_7_constraint_inactive(heat_run):
    t0 = time.perf_counter()
    cfg, traj, _ = heat_run
    bars = V.sampled_barriers(QUAD, DISK, cfg.data, n_points=16, explicit=True)
    C = {}
    below = True
    for L in (2.0, 3.0, 4.0, 8.0):
        tr = traj if L == cfg.L else S.solve(S.SolverConfig(h=cfg.h, L=L, mesh=cfg.mesh, integrand=QUAD, data=cfg.data))
        rep = V.lipschitz_certificate(tr, bars, cfg.data, DISK)
        C[L] = rep.computed_C
        below &= rep.computed_C < L and not rep.constraint_active
    spread = max(C.values()) - min(C.values())
    try:
        S.SolverConfig(h=cfg.h, L=0.5, mesh=cfg.mesh, integrand=QUAD, data=cfg.data)
        rejected = False
    except S.InfeasibleConstraint:
        rejected = True
    checks = [le("C spread", spread, 1e-6), ("C < L", min(C.values()), "each L", bool(below)),
              ("L=0.5 rejected", float(rejected), "1", rejected)]
    assert record(7, checks, time.perf_counter() - t0, 300.0), checks


def test_criterion_8_mollifier():
    t0 = time.perf_counter()
    grid = np.linspace(0, 2, 401)
    series = [lambda t: np.sin(t), lambda t: t**2, lambda t: np.exp(-t) * np.cos(3 * t), lambda t: np.array([1.0, t])]
    ode = max(Mo.ode_residual(TimeSeriesField.from_function(s, grid), h) for s in series for h in (0.05, 0.3, 1.0))
    ramp = 0.0
    for h in (0.1, 0.5, 2.0):
        v = TimeSeriesField.from_function(lambda t: t, grid, 0.0)
        ramp = max(ramp, np.max(np.abs(Mo.mollify(v, h).values[:, 0] - (grid - h * (1 - np.exp(-grid / h))))))
    slack = np.inf
    rng = np.random.default_rng(2)
    for r in (1.0, 2.0, np.inf):
        for _ in range(5):
            a, c, vo = rng.normal(size=3)
            v = TimeSeriesField.from_function(lambda t: np.array([a * np.sin(2 * t) + c, t * a]), grid, [vo, -vo])
            rep = Mo.mollifier_norm_check(v, rng.uniform(0.05, 1.0), r, rng.uniform(0.2, 2.0))
            slack = min(slack, rep.rhs - rep.lhs)
    checks = [le("ODE residual", ode, 1e-8), le("ramp", ramp, 1e-10), ge("norm slack", slack, -1e-8)]
    assert record(8, checks, time.perf_counter() - t0, 5.0), checks


def test_criterion_9_conjugates():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    fy = 0.0
    for f in (I.quadratic(), I.quartic(), I.flat_bottomed()):
        for xi in rng.uniform(-3, 3, (20, 2)):
            e = f.grad(xi)
            fy = max(fy, abs(f.eval(xi) + I.conjugate(f, e, use_analytic=False) - xi @ e) / max(1.0, abs(xi @ e)))
    inv = 0.0
    for f in (I.quadratic(), I.quartic()):
        for r in np.linspace(1.1, 5.0, 12):
            for th in np.linspace(0, 2 * np.pi, 8, endpoint=False):
                xi = r * np.array([np.cos(th), np.sin(th)])
                inv = max(inv, np.linalg.norm(I.grad_conjugate(f, f.grad(xi), use_analytic=False) - xi))
    g1 = np.linspace(-5, 5, 21)
    E = np.stack(np.meshgrid(g1, g1, indexing="ij"), -1).reshape(-1, 2)
    quart = np.max(np.abs(I.conjugate(I.quartic(), E, use_analytic=False) - 0.75 * np.linalg.norm(E, axis=1) ** (4 / 3)))
    checks = [le("Fenchel-Young", fy, 1e-8), le("inverse gradient", inv, 1e-6), le("quartic conjugate", quart, 1e-6)]
    assert record(9, checks, time.perf_counter() - t0, 10.0), checks


def test_criterion_10_tbsc():
    t0 = time.perf_counter()
    data = B.rotating_affine(np.pi)
    cert = B.certify_tbsc(data, DISK, XO)
    exact = np.column_stack([np.cos(cert.times), np.sin(cert.times)])
    w_err = max(np.max(np.abs(cert.w_minus_samples - exact)), np.max(np.abs(cert.w_plus_samples - exact)))
    g = lambda x, t: np.sqrt(np.linalg.norm(np.asarray(x, float) - XO, axis=-1))
    bad = B.from_callables("sqrt_dist", g, lambda x, t: 0.0 * g(x, t), 1.0, DISK)
    try:
        B.certify_tbsc(bad, DISK, XO, time_samples=3)
        side = None
    except B.Infeasible as exc:
        side = exc.side
    checks = [le("|Q - 1|", abs(cert.Q - 1), 1e-6), le("slope error", w_err, 1e-6),
              ("unbounded-slope datum rejected", float(side == "upper"), "upper side", side == "upper")]
    assert record(10, checks, time.perf_counter() - t0, 10.0), checks
