"""Minimizing movements against Crank-Nicolson for the heat flow with rotating affine data.

For the quadratic integrand and an inactive gradient bound the scheme is
implicit Euler, so the space-time L2 error against a fine CN reference should
halve with h.
"""

import argparse
import time
from dataclasses import dataclass, field

import numpy as np

from minmove import boundary, geometry, integrand, reference, solver


@dataclass
class OracleConfig:
    mesh_edge: float = 0.1
    T: float = np.pi / 2
    L: float = 4.0
    divisions: list = field(default_factory=lambda: [16, 32, 64, 128])
    cn_substeps: int = 8


def relative_error(traj, ref, M):
    d = traj.steps[1:] - ref[1:]
    num = sum(float(x @ (M @ x)) for x in d)
    den = sum(float(x @ (M @ x)) for x in ref[1:])
    return np.sqrt(num / den)


def main(cfg: OracleConfig):
    dom = geometry.disk()
    mesh = geometry.mesh_domain(dom, cfg.mesh_edge)
    data = boundary.rotating_affine(cfg.T)
    _, M = reference.assemble_p1(mesh.vertices, mesh.simplices)
    print(f"{mesh.n_vertices} vertices")
    print("k        h            rel_err      ratio   seconds")
    prev = None
    for k in cfg.divisions:
        h = cfg.T / k
        t0 = time.perf_counter()
        traj = solver.solve(solver.SolverConfig(h=h, L=cfg.L, mesh=mesh, integrand=integrand.quadratic(), data=data))
        sec = time.perf_counter() - t0
        _, U = reference.crank_nicolson(mesh.vertices, mesh.simplices, mesh.boundary_vertices, data.g, cfg.T,
                                        h / cfg.cn_substeps)
        err = relative_error(traj, U[::cfg.cn_substeps], M)
        ratio = "" if prev is None else f"{prev / err:.3f}"
        print(f"{k:<8d} {h:<12.6g} {err:<12.4e} {ratio:<7} {sec:.2f}")
        prev = err


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mesh-edge", type=float, default=OracleConfig.mesh_edge)
    ap.add_argument("--L", type=float, default=OracleConfig.L)
    a = ap.parse_args()
    main(OracleConfig(mesh_edge=a.mesh_edge, L=a.L))
