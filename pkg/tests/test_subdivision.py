import numpy as np
import pytest

import bwrmesh as bw
from bwrmesh.errors import OpenMeshError
from bwrmesh.subdivision import (
    PROV_BUTTERFLY,
    PROV_NORMAL_FALLBACK,
    SubdivisionStep,
    subdivided_counts,
)


def test_counts_one_level(octa):
    step = SubdivisionStep(octa)
    c = step.child
    assert c.n_vertices == 6 + 12
    assert c.n_faces == 32
    assert c.n_edges == 48


def test_counts_formula():
    v, e, f = subdivided_counts(6, 12, 8, 5)
    assert v == 2 ** (2 * 5 + 2) + 2
    assert f == 8 * 4**5
    assert e == 12 * 4**5


def test_open_mesh_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float)
    m = bw.TriangleMesh(v, [[0, 1, 2]])
    with pytest.raises(OpenMeshError):
        SubdivisionStep(m)


def test_new_vertices_are_midpoints(octa):
    step = SubdivisionStep(octa)
    for i, (a, b) in enumerate(octa.edges):
        mid = 0.5 * (octa.vertices[a] + octa.vertices[b])
        assert np.array_equal(step.child.vertices[6 + i], mid)


def test_child_faces_structure(octa):
    step = SubdivisionStep(octa)
    f = step.child.faces
    # four children per parent face; slot 3 is the interior triangle of
    # midpoints only
    for k in range(octa.n_faces):
        interior = f[4 * k + 3]
        assert np.all(interior >= 6)
    # old vertices keep their indices
    assert np.array_equal(step.child.vertices[:6], octa.vertices)


def test_edge_tree_is_a_bijection(octa):
    step = SubdivisionStep(octa)
    tree = step.child_edges_of
    assert tree.shape == (12, 4)
    flat = tree.reshape(-1)
    assert len(np.unique(flat)) == step.child.n_edges == 48


def test_edge_tree_slots(octa):
    step = SubdivisionStep(octa)
    child = step.child
    for i, (a, b) in enumerate(octa.edges):
        mid = 6 + i
        halves = {tuple(sorted((int(a), mid))), tuple(sorted((int(b), mid)))}
        got = {
            tuple(child.edges[step.child_edges_of[i, 0]]),
            tuple(child.edges[step.child_edges_of[i, 1]]),
        }
        assert got == halves
        # interior children touch the midpoint and another midpoint vertex
        for slot in (2, 3):
            u, v = child.edges[step.child_edges_of[i, slot]]
            assert mid in (u, v)
            assert u >= 6 and v >= 6


def test_octahedron_stencils_incomplete(octa):
    # every octahedron vertex has valence 4, so each wing coincides with an
    # edge endpoint and no stencil has eight distinct vertices
    step = SubdivisionStep(octa)
    _, complete = step.butterfly_stencils()
    assert not complete.any()
    dirs, prov = step.direction_field(bw.DirectionConfig())
    assert np.all(prov == PROV_NORMAL_FALLBACK)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)


def test_butterfly_direction_matches_formula():
    mesh = bw.icosphere(2)
    step = SubdivisionStep(mesh)
    stencil, complete = step.butterfly_stencils()
    dirs, prov = step.direction_field(bw.DirectionConfig())
    used = np.flatnonzero(prov == PROV_BUTTERFLY)
    assert used.size > 0
    v = mesh.vertices
    for e in used[:20]:
        s = stencil[e]
        raw = 2.0 * (v[s[2]] + v[s[3]]) - (v[s[4]] + v[s[5]] + v[s[6]] + v[s[7]])
        assert np.allclose(dirs[e], raw / np.linalg.norm(raw))


def test_flat_region_falls_back_to_normal():
    # a flat patch makes the raw butterfly direction vanish; the direction
    # must come from the midpoint normal instead of a near-zero vector
    ref = bw.icosphere(2)
    v = ref.vertices.copy()
    step = SubdivisionStep(bw.TriangleMesh(v, ref.faces))
    cfg = bw.DirectionConfig(eps_s=1e9)  # force every stencil to look flat
    dirs, prov = step.direction_field(cfg)
    assert np.all(prov == PROV_NORMAL_FALLBACK)
    assert np.allclose(dirs, step.parent.midpoint_normals())


def test_tilt_threshold_triggers_fallback():
    mesh = bw.icosphere(2)
    step = SubdivisionStep(mesh)
    strict = bw.DirectionConfig(theta_tilt_deg=0.0)  # nothing passes
    dirs, prov = step.direction_field(strict)
    assert np.all(prov == PROV_NORMAL_FALLBACK)


def test_stencil_single_vertex_api(octa):
    step = SubdivisionStep(octa)
    idx, complete = step.butterfly_stencil(6)
    assert idx[0] == octa.edges[0, 0] and idx[1] == octa.edges[0, 1]
    assert complete is False
    with pytest.raises(IndexError):
        step.butterfly_stencil(5)
