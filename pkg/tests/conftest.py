import numpy as np
import pytest

from treepoisson.config import data_path
from treepoisson.mesh import TriMesh, generate_structured_square, read_triangle

ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def unit_square():
    """The n=1 structured square: two triangles split along (0,0)-(1,1)."""
    return generate_structured_square(1)


@pytest.fixture(scope="session")
def dipole_mesh():
    return read_triangle(data_path("dipole"))


@pytest.fixture(scope="session")
def jittered_square():
    """Unstructured-looking mesh of the unit square (interior nodes perturbed)."""
    mesh = generate_structured_square(12)
    v = mesh.vertices.copy()
    rng = np.random.default_rng(3)
    inner = (v > 1e-12).all(axis=1) & (v < 1 - 1e-12).all(axis=1)
    v[inner] += rng.uniform(-0.25, 0.25, size=(inner.sum(), 2)) / 12
    return TriMesh(v, mesh.triangles)
