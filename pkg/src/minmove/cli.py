"""Scenario runner.

    minmove run <config> [--out DIR] [--seed N] [--quiet]
    minmove check-domain <config>
    minmove certify-bsc <config>
    minmove barrier <config>

Exit codes: 0 all checks pass, 1 some check fails, 2 configuration error.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import json
import logging
import operator
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import barrier as bar
from . import boundary, geometry, integrand, solver, verify

log = logging.getLogger("minmove")
FMT = "%.17g"


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------- config

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
        ast.Pow: operator.pow, ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_number(text: str) -> float:
    """Arithmetic on numbers and pi, e.g. "pi/64" or "-1.5e-3"."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return float(np.pi)
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"not a number: {text!r}")
    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError:
        raise ConfigError(f"not a number: {text!r}") from None


def parse_list(text: str):
    text = text.strip()
    return [parse_number(s) for s in text.split(",") if s.strip()] if text else []


@dataclass
class Scenario:
    domain: dict
    integrand: str
    datum: dict
    T: float
    mesh_edge: float
    h: float
    L: float
    inner_tol: float = 1e-10
    constraint_mode: str = "projection"
    barrier_alpha: float | None = None
    barrier_explicit: bool = False
    x_o: tuple | None = None
    barrier_points: int = 16
    checks: list = field(default_factory=list)
    trace_times: list = field(default_factory=list)
    raw: dict = field(default_factory=dict)


def load_config(path: str) -> Scenario:
    if not os.path.exists(path):
        raise ConfigError(f"config file {path} not found")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for sec in ("domain", "integrand", "datum", "solver"):
        if not cp.has_section(sec):
            raise ConfigError(f"missing section [{sec}]")
    try:
        dom = {k: v for k, v in cp["domain"].items()}
        datum = {k: v for k, v in cp["datum"].items()}
        sol = cp["solver"]
        sc = Scenario(
            domain=dom,
            integrand=cp["integrand"].get("name", "quadratic").strip(),
            datum=datum,
            T=parse_number(datum.pop("t", "pi")),
            mesh_edge=parse_number(dom.pop("mesh_edge", "0.1")),
            h=parse_number(sol["h"]),
            L=parse_number(sol["l"]),
            inner_tol=parse_number(sol.get("inner_tol", "1e-10")),
            constraint_mode=sol.get("constraint_mode", "projection").strip(),
        )
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}") from None
    if cp.has_section("barrier"):
        b = cp["barrier"]
        sc.barrier_alpha = parse_number(b["alpha"]) if "alpha" in b else None
        sc.barrier_explicit = b.getboolean("explicit", fallback=False)
        sc.x_o = tuple(parse_list(b["x_o"])) if "x_o" in b else None
        sc.barrier_points = int(parse_number(b.get("points", "16")))
    if cp.has_section("checks"):
        c = cp["checks"]
        sc.checks = [s.strip() for s in c.get("run", "").split(",") if s.strip()]
        sc.trace_times = parse_list(c.get("trace_times", ""))
    sc.raw = {s: dict(cp[s]) for s in cp.sections()}
    return sc


def build_domain(sc: Scenario):
    params = {k: parse_number(v) if k != "center" else tuple(parse_list(v)) for k, v in sc.domain.items() if k != "kind"}
    try:
        return geometry.by_name(sc.domain.get("kind", "disk").strip(), **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"domain: {exc}") from None


def build_datum(sc: Scenario, dom):
    kind = sc.datum.get("kind", "rotating_affine").strip()
    params = {}
    for k, v in sc.datum.items():
        if k == "kind":
            continue
        if k == "terms":
            vals = parse_list(v)
            if len(vals) % 6:
                raise ConfigError("datum.terms needs groups of six numbers (k, m, A, B, C, D)")
            params[k] = [tuple(vals[i:i + 6]) for i in range(0, len(vals), 6)]
        elif k == "slope":
            params[k] = parse_list(v)
        else:
            params[k] = parse_number(v)
    try:
        return boundary.by_name(kind, dom, sc.T, **params)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"datum: {exc}") from None


# ------------------------------------------------------------- output

class Artifacts:
    def __init__(self, out, params):
        self.out = out
        self.files = []
        self.params = params
        os.makedirs(out, exist_ok=True)
        self.summary = os.path.join(out, "summary.csv")
        if os.path.exists(self.summary):
            os.remove(self.summary)

    def path(self, name):
        p = os.path.join(self.out, name)
        if name not in self.files:
            self.files.append(name)
        return p

    def table(self, name, arr, header):
        np.savetxt(self.path(name), np.asarray(arr), fmt=FMT, delimiter=",", header=header, comments="")

    def report(self, name, rep, passed):
        self.path("summary.csv")
        verify.append_csv_row(rep, self.summary, name)
        return (name, bool(passed))

    def manifest(self, results):
        self.path("manifest.json")
        doc = {"parameters": self.params, "files": sorted(self.files),
               "checks": [{"name": n, "passed": p} for n, p in results]}
        with open(os.path.join(self.out, "manifest.json"), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)


def barrier_traces(b: bar.Barrier, dom, data, times, art: Artifacts, n: int = 256):
    """Per time: theta, g on the domain boundary, v on the domain boundary,
    then theta', x1, x2, v on the boundary of the sublevel set."""
    written = []
    for k, t in enumerate(times):
        bd = bar.boundary_trace(b, dom, data, t, n)
        if b.f.name == "quadratic":
            sub = quadratic_sublevel_ball(b, t, n)
        else:
            sub = bar.sublevel_trace(b, dom, t, n)
        name = f"trace_{k}.csv"
        art.table(name, np.column_stack([bd, sub]),
                  f"# t={FMT % t}\ntheta,g_boundary,v_boundary,theta_sub,x1_sub,x2_sub,v_sub")
        written.append(name)
    return written


def quadratic_sublevel_ball(b: bar.Barrier, t: float, n: int = 256):
    """For f = |xi|^2/2 the sublevel set is a ball centred at y + (n/alpha) w."""
    w = b.w(t)
    centre = b.y(t) + (b.n / b.alpha) * w
    radius = float(np.linalg.norm(b.x_o - centre))
    theta = 2 * np.pi * np.arange(n) / n
    pts = centre + radius * np.column_stack([np.cos(theta), np.sin(theta)])
    return np.column_stack([theta, pts, b.eval(pts, t)])


# ---------------------------------------------------------- pipelines

BARRIER_TOL = {"pin_err": 1e-10, "ordering_viol": 1e-10, "subsol_viol": 1e-8}


def _domain_gate(sc, dom, art, results, need_convexity):
    rep = geometry.check_domain(dom)
    results.append(art.report("check_domain", rep, rep.passed))
    if need_convexity and not rep.passed:
        raise ConfigError(f"barrier requested but the domain is not R-uniformly convex with R={dom.R:g} "
                          f"(worst slack {rep.worst_slack:.3g} at {rep.worst_pair})")
    return rep


def _certificate(sc, dom, data):
    x_o = np.array(sc.x_o) if sc.x_o is not None else dom.boundary(np.array([np.pi]))[0]
    cert = boundary.certify_tbsc(data, dom, x_o)
    return boundary.widen_slopes(cert, data, dom)


@dataclass
class _CertRow:
    Q: float
    Qdot: float
    Q1: float
    analytic: bool


def _barriers(sc, f, dom, data, cert):
    if sc.barrier_explicit:
        a = 2.0 if sc.barrier_alpha is None else abs(sc.barrier_alpha)
        return bar.explicit_disk_barrier(f, dom, data, cert, a), bar.explicit_disk_barrier(f, dom, data, cert, -a)
    a = bar.alpha_min(f, dom, data, cert) if sc.barrier_alpha is None else abs(sc.barrier_alpha)
    return bar.build(f, dom, data, cert, a), bar.build(f, dom, data, cert, -a)


def _barrier_checks(sc, f, dom, data, cert, art, results):
    pair = _barriers(sc, f, dom, data, cert)
    for b in pair:
        rep = bar.verify(b, f, dom, data, Qdot=cert.Qdot)
        ok = all(getattr(rep, k) <= v for k, v in BARRIER_TOL.items())
        results.append(art.report(f"barrier_{b.sign}", rep, ok))
    return pair


def execute(command: str, sc: Scenario, out: str, seed: int | None = None) -> int:
    params = {"command": command, "seed": seed, **sc.raw}
    art = Artifacts(out, params)
    results = []
    dom = build_domain(sc)
    f = integrand.by_name(sc.integrand)
    data = build_datum(sc, dom)
    wants_barrier = command == "barrier" or (command == "run" and any(
        c in sc.checks for c in ("barrier", "lipschitz", "traces")))
    _domain_gate(sc, dom, art, results, wants_barrier)
    if command == "check-domain":
        art.manifest(results)
        return _exit(results)

    if command in ("certify-bsc", "barrier", "run") and (command != "run" or "tbsc" in sc.checks or wants_barrier):
        try:
            cert = _certificate(sc, dom, data)
        except (boundary.Infeasible, boundary.WideningInsufficient) as exc:
            log.error("certification failed: %s", exc)
            results.append(("certify_bsc", False))
            art.manifest(results)
            return 1
        art.table("certificate.csv", cert.table(), "t,w_minus_1,w_minus_2,w_plus_1,w_plus_2,slope_norm")
        results.append(art.report("certify_bsc", _CertRow(cert.Q, cert.Qdot, cert.Q1, cert.analytic is not None), True))
    if command == "certify-bsc":
        art.manifest(results)
        return _exit(results)

    if wants_barrier:
        pair = _barrier_checks(sc, f, dom, data, cert, art, results)
        if command == "barrier" or "traces" in sc.checks:
            barrier_traces(pair[0], dom, data, sc.trace_times, art)
    if command == "barrier":
        art.manifest(results)
        return _exit(results)

    mesh = geometry.mesh_domain(dom, sc.mesh_edge, seed=seed)
    geometry.write_mesh(mesh, os.path.join(out, "mesh"))
    art.files += ["mesh_vertices.txt", "mesh_simplices.txt", "mesh_boundary.txt"]
    try:
        cfg = solver.SolverConfig(h=sc.h, L=sc.L, mesh=mesh, integrand=f, data=data, inner_tol=sc.inner_tol,
                                  constraint_mode=sc.constraint_mode)
    except solver.InfeasibleConstraint as exc:
        raise ConfigError(f"gradient bound infeasible: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    traj = solver.solve(cfg)
    width = len(str(len(traj.steps) - 1))
    for i in range(len(traj.steps)):
        name = f"step_{i:0{width}d}.txt"
        np.savetxt(art.path(name), traj.table(i), fmt=FMT, header=f"t={FMT % traj.times[i]}\nx1 x2 u")
    rep = solver.trajectory_invariants(traj, cfg)
    results.append(art.report("invariants", rep, rep.passed))

    if "energy" in sc.checks:
        rep = solver.energy_report(traj, cfg, raise_on_violation=False)
        art.table("energy.csv", rep.table(), "i,energy,increment,slack")
        results.append(art.report("energy", _EnergyRow(rep.K, rep.worst_slack, rep.worst_index), rep.worst_slack >= -1e-7))
    if "lipschitz" in sc.checks:
        samples = verify.sampled_barriers(f, dom, data, sc.barrier_points, alpha=sc.barrier_alpha,
                                          explicit=sc.barrier_explicit)
        rep = verify.lipschitz_certificate(traj, samples, data, dom)
        results.append(art.report("lipschitz", rep, rep.within_bound and not rep.constraint_active))
    if "comparison" in sc.checks:
        shift = 0.1
        traj2 = solver.solve(solver.SolverConfig(h=sc.h, L=sc.L, mesh=mesh, integrand=f,
                                                 data=boundary.shifted(data, shift), inner_tol=sc.inner_tol,
                                                 constraint_mode=sc.constraint_mode))
        rep = verify.comparison_test(traj, traj2)
        results.append(art.report("comparison", rep, rep.passed))
        rep = verify.max_principle_test(traj2, traj)
        results.append(art.report("max_principle", rep, rep.passed))
    if "holder" in sc.checks:
        results.append(art.report("holder", verify.holder_quotient(traj), True))
    art.manifest(results)
    return _exit(results)


@dataclass
class _EnergyRow:
    K: float
    worst_slack: float
    worst_index: int


def _exit(results):
    for name, ok in results:
        log.info("%-16s %s", name, "PASS" if ok else "FAIL")
    return 0 if all(ok for _, ok in results) else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="minmove", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["run", "check-domain", "certify-bsc", "barrier"])
    ap.add_argument("config")
    ap.add_argument("--out", default="out")
    ap.add_argument("--seed", type=int, default=None, help="mesh jitter seed")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        sc = load_config(args.config)
        return execute(args.command, sc, args.out, args.seed)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
