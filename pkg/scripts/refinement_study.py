"""Time-refinement diagnostics on the rotating-datum scenario.

Per h: distance to the next finer trajectory, the initial-attainment average,
the variational-inequality residual with v = g in its discrete and
continuous-time forms, and the Hoelder quotients.
"""

import argparse
from dataclasses import dataclass, field

import numpy as np

from minmove import boundary, geometry, integrand, solver, verify
from minmove.mollify import TimeSeriesField


@dataclass
class RefinementConfig:
    mesh_edge: float = 0.1
    T: float = np.pi / 2
    L: float = 4.0
    divisions: list = field(default_factory=lambda: [16, 32, 64, 128])


def distance(a, b, M, T, samples=512):
    ts = (np.arange(samples) + 0.5) * T / samples
    d = [a.piecewise_constant(t) - b.piecewise_constant(t) for t in ts]
    return np.sqrt(sum(float(x @ (M @ x)) for x in d) * T / samples)


def main(cfg: RefinementConfig):
    mesh = geometry.mesh_domain(geometry.disk(), cfg.mesh_edge)
    data = boundary.rotating_affine(cfg.T)
    runs = {}
    for k in cfg.divisions:
        sc = solver.SolverConfig(h=cfg.T / k, L=cfg.L, mesh=mesh, integrand=integrand.quadratic(), data=data)
        runs[k] = (sc, solver.solve(sc))
    print("k      dist_to_next  attainment   vi_discrete   vi_continuous  holder_t   lip")
    for j, k in enumerate(cfg.divisions):
        sc, traj = runs[k]
        nxt = cfg.divisions[j + 1] if j + 1 < len(cfg.divisions) else None
        dist = distance(traj, runs[nxt][1], mesh.mass_matrix, cfg.T) if nxt else float("nan")
        tt = np.linspace(0, cfg.T, 4 * k + 1)
        gv = TimeSeriesField(tt, np.array([mesh.interpolate(lambda x: data.g(x, t)) for t in tt]),
                             mesh.interpolate(data.g0))
        vi_d = solver.vi_residual(traj, gv, cfg.T, sc)
        vi_c = solver.vi_residual(traj, gv, cfg.T, sc, discrete=False)
        hq = verify.holder_quotient(traj)
        print(f"{k:<6d} {dist:<13.4e} {solver.initial_attainment(traj):<12.4e} {vi_d:<13.6f} {vi_c:<14.6f} "
              f"{hq.time_half_holder:<10.5f} {hq.space_lip:.5f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mesh-edge", type=float, default=RefinementConfig.mesh_edge)
    a = ap.parse_args()
    main(RefinementConfig(mesh_edge=a.mesh_edge))
