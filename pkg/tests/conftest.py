import numpy as np
import pytest

import bwrmesh as bw


@pytest.fixture(scope="session")
def octa():
    return bw.octahedron()


@pytest.fixture(scope="session")
def sphere_ref():
    """Mid-resolution octahedron-based icosphere (2048 faces)."""
    return bw.icosphere(4)


@pytest.fixture(scope="session")
def coarse_sphere():
    return bw.icosphere(3)


@pytest.fixture(scope="session")
def uv_ref():
    return bw.uv_sphere(16, 8)


@pytest.fixture(scope="session")
def torus_ref():
    return bw.torus(major_segments=24, minor_segments=12)


@pytest.fixture(scope="session")
def sphere_hierarchy(sphere_ref):
    """Octahedron base remeshed over the icosphere at J=3."""
    base = bw.octahedron_base(sphere_ref)
    return bw.bwr_remesh(base, sphere_ref, 3)


@pytest.fixture()
def cube():
    v = np.array(
        [
            [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
            [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
        ],
        dtype=np.float64,
    )
    f = np.array(
        [
            [0, 2, 1], [0, 3, 2],          # bottom (z=0)
            [4, 5, 6], [4, 6, 7],          # top (z=1)
            [0, 1, 5], [0, 5, 4],          # front (y=0)
            [1, 2, 6], [1, 6, 5],          # right (x=1)
            [2, 3, 7], [2, 7, 6],          # back (y=1)
            [3, 0, 4], [3, 4, 7],          # left (x=0)
        ],
        dtype=np.int64,
    )
    return bw.TriangleMesh(v, f)
