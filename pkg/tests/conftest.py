import numpy as np
import pytest

from minmove import boundary as B, geometry as G, integrand as I, solver as S

# (criterion, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    seen = {k: (ok, detail) for k, ok, detail in ACCEPTANCE}
    for k in range(1, 11):
        ok, detail = seen.get(k, (False, "did not complete"))
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def disk():
    return G.disk()


@pytest.fixture(scope="session")
def coarse_run(disk):
    """Rotating datum on a 0.1 disk mesh, h = pi/64, T = pi/2, L = 4."""
    mesh = G.mesh_domain(disk, 0.1)
    cfg = S.SolverConfig(h=np.pi / 64, L=4.0, mesh=mesh, integrand=I.quadratic(), data=B.rotating_affine(np.pi / 2))
    return cfg, S.solve(cfg)
