"""Largest discrete Lipschitz constant of the trajectory as the gradient bound L varies.

Above the barrier bound the constraint never binds and the trajectory does not
depend on L; below it the projection becomes active.
"""

import argparse
from dataclasses import dataclass, field

import numpy as np

from minmove import boundary, geometry, integrand, solver, verify


@dataclass
class InactivityConfig:
    mesh_edge: float = 0.2
    h: float = np.pi / 32
    T: float = np.pi / 2
    Ls: list = field(default_factory=lambda: [1.05, 1.1, 1.2, 1.5, 2.0, 3.0, 4.0, 8.0])


def main(cfg: InactivityConfig):
    dom = geometry.disk()
    mesh = geometry.mesh_domain(dom, cfg.mesh_edge)
    data = boundary.rotating_affine(cfg.T)
    f = integrand.quadratic()
    bars = verify.sampled_barriers(f, dom, data, n_points=16, explicit=True)
    ref = None
    print("L       computed_C   bound    active  max|u - u(L=max)|")
    for L in sorted(cfg.Ls, reverse=True):
        traj = solver.solve(solver.SolverConfig(h=cfg.h, L=L, mesh=mesh, integrand=f, data=data))
        rep = verify.lipschitz_certificate(traj, bars, data, dom)
        ref = traj.steps if ref is None else ref
        print(f"{L:<7.3g} {rep.computed_C:<12.6f} {rep.bound:<8.4f} {str(rep.constraint_active):<7} "
              f"{np.max(np.abs(traj.steps - ref)):.3e}", flush=True)
    try:
        solver.SolverConfig(h=cfg.h, L=0.5, mesh=mesh, integrand=f, data=data)
    except solver.InfeasibleConstraint as exc:
        print(f"L=0.5 rejected: {exc}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mesh-edge", type=float, default=InactivityConfig.mesh_edge)
    a = ap.parse_args()
    main(InactivityConfig(mesh_edge=a.mesh_edge))
