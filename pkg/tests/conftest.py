import numpy as np
import pytest

from sctrap.fieldsolver import FieldMap
from sctrap.fieldsolver.mesh import Mesh


def uniform_mesh(half=20e-6, n=81):
    x = np.linspace(-half, half, n)
    z = np.linspace(-half, half, n)
    cells = (n - 1, n - 1)
    return Mesh(x, z, np.zeros(cells, np.int8), np.full(cells, -1, np.int32),
                float(x[1] - x[0]), 1.0)


def energy_map(fn, half=20e-6, n=81):
    """Energy FieldMap from fn(X, Z) on a uniform vacuum mesh."""
    mesh = uniform_mesh(half, n)
    X, Z = mesh.node_grid()
    return FieldMap(mesh, "energy", np.asarray(fn(X, Z), float))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = {}


def record(number, checks):
    """Store (name, ok, detail) checks for a criterion and print its verdict line."""
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{name}: {d}{'' if good else ' [FAIL]'}" for name, good, d in checks)
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok, [name for name, good, _ in checks if not good]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
