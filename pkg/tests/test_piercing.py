import numpy as np
import pytest

import bwrmesh as bw
from bwrmesh.errors import PierceMissError
from bwrmesh.piercing import (
    PROV_CHOSE_NEGATIVE,
    PROV_CHOSE_POSITIVE,
    PROV_UNIQUE,
    Bvh,
    barycentric,
    pierce,
    pierce_all,
    ray_plane_intersect,
)
from bwrmesh.subdivision import DirectionConfig, SubdivisionStep

TRI = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def test_ray_plane_basic():
    w = ray_plane_intersect([0.25, 0.25, 1.0], [0.0, 0.0, -1.0], TRI)
    assert np.isclose(w, 1.0)


def test_ray_plane_parallel_returns_none():
    assert ray_plane_intersect([0, 0, 1.0], [1.0, 0, 0], TRI) is None


def test_ray_plane_negative_w():
    w = ray_plane_intersect([0.25, 0.25, -2.0], [0.0, 0.0, -1.0], TRI)
    assert np.isclose(w, -2.0)


def test_barycentric_inside_and_outside():
    (a, b, g), inside = barycentric([0.25, 0.25, 0.0], TRI)
    assert inside and np.isclose(a + b + g, 1.0)
    _, outside = barycentric([2.0, 2.0, 0.0], TRI)
    assert not outside


def test_barycentric_edge_tolerance():
    # a point a hair outside the edge still counts as inside
    _, inside = barycentric([-1e-12, 0.5, 0.0], TRI)
    assert inside


def _two_sheet_mesh():
    """Two horizontal sheets at z=0 and z=1, closed into a slab-like box."""
    return bw.TriangleMesh(
        np.array(
            [
                [0, 0, 0], [4, 0, 0], [4, 4, 0], [0, 4, 0],
                [0, 0, 1], [4, 0, 1], [4, 4, 1], [0, 4, 1],
            ],
            dtype=np.float64,
        ),
        np.array(
            [
                [0, 2, 1], [0, 3, 2],
                [4, 5, 6], [4, 6, 7],
                [0, 1, 5], [0, 5, 4],
                [1, 2, 6], [1, 6, 5],
                [2, 3, 7], [2, 7, 6],
                [3, 0, 4], [3, 4, 7],
            ],
            dtype=np.int64,
        ),
    )


def test_unique_hit_provenance():
    mesh = _two_sheet_mesh()
    # from above the top sheet pointing down but normal agreeing only with top
    r = pierce([2.0, 2.0, 2.0], [0.0, 0.0, -1.0], mesh, [0.0, 0.0, 1.0])
    assert r.w > 0


def test_two_sided_pick_by_normal():
    mesh = _two_sheet_mesh()
    # origin between the sheets; +w hits the bottom sheet (normal -z),
    # -w hits the top sheet (normal +z)
    r_up = pierce([2.0, 2.0, 0.5], [0.0, 0.0, -1.0], mesh, [0.0, 0.0, -1.0])
    assert r_up.provenance == PROV_CHOSE_POSITIVE and r_up.w > 0
    r_dn = pierce([2.0, 2.0, 0.5], [0.0, 0.0, -1.0], mesh, [0.0, 0.0, 1.0])
    assert r_dn.provenance == PROV_CHOSE_NEGATIVE and r_dn.w < 0


def test_tie_prefers_smaller_magnitude():
    mesh = _two_sheet_mesh()
    # midpoint normal orthogonal to both sheet normals: equal dot products;
    # origin nearer the top sheet, so the smaller-|w| negative hit wins
    r = pierce([2.0, 2.0, 0.75], [0.0, 0.0, -1.0], mesh, [1.0, 0.0, 0.0])
    assert r.provenance == PROV_CHOSE_NEGATIVE
    assert np.isclose(r.w, -0.25)


def test_zero_w_counts_as_positive(octa):
    # octahedron self-remesh: midpoints of the base lie on the reference edge
    step = SubdivisionStep(octa)
    dirs, _ = step.direction_field(bw.DirectionConfig())
    n_m = octa.midpoint_normals()
    results, misses = pierce_all(step.midpoints, dirs, octa, n_m)
    assert not misses
    assert all(np.isclose(r.w, 0.0) for r in results)


def test_incidence_of_hits(sphere_ref):
    step = SubdivisionStep(bw.octahedron_base(sphere_ref))
    dirs, _ = step.direction_field(bw.DirectionConfig())
    n_m = step.parent.midpoint_normals()
    results, misses = pierce_all(step.midpoints, dirs, sphere_ref, n_m)
    assert not misses
    diag = sphere_ref.bbox().diagonal
    v, f = sphere_ref.vertices, sphere_ref.faces
    for r, o, d in zip(results, step.midpoints, dirs):
        tri = v[f[r.face]]
        n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        n /= np.linalg.norm(n)
        p = o + r.w * d
        assert abs(np.dot(p - tri[0], n)) <= 1e-9 * diag
        assert min(r.bary) >= -1e-10


def test_miss_reported():
    mesh = _two_sheet_mesh()
    results, misses = pierce_all(
        [[10.0, 10.0, 10.0]], [[0.0, 0.0, 1.0]], mesh, [[0.0, 0.0, 1.0]]
    )
    assert misses == [0] and results[0] is None
    with pytest.raises(PierceMissError):
        pierce([10.0, 10.0, 10.0], [0.0, 0.0, 1.0], mesh, [0.0, 0.0, 1.0])


def _rays_for(mesh, reference):
    step = SubdivisionStep(mesh)
    dirs, _ = step.direction_field(bw.DirectionConfig())
    return step.midpoints, dirs, step.parent.midpoint_normals()


@pytest.mark.parametrize("threads", [1, 4])
def test_bvh_equals_full_search(sphere_ref, threads):
    base = bw.octahedron_base(sphere_ref)
    mesh = base
    for _ in range(3):
        step = SubdivisionStep(mesh)
        mesh = step.child
    origins, dirs, n_m = _rays_for(step.parent, sphere_ref)
    full, m1 = pierce_all(origins, dirs, sphere_ref, n_m, mode="full-search")
    fast, m2 = pierce_all(
        origins, dirs, sphere_ref, n_m, mode="accelerated", threads=threads
    )
    assert m1 == m2
    for a, b in zip(full, fast):
        assert a.face == b.face
        assert a.w == b.w  # bit-identical by construction


def test_bvh_candidates_cover_hits(sphere_ref):
    bvh = Bvh(sphere_ref)
    rng = np.random.default_rng(7)
    for _ in range(50):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        faces = bvh.line_candidate_faces(np.zeros(3), d)
        # a line through the center must cross the sphere twice
        assert len(faces) >= 2
        assert np.all(np.diff(faces) > 0)


def test_pierce_all_input_validation(sphere_ref):
    with pytest.raises(ValueError):
        pierce_all(
            [[0, 0, 0]], [[0, 0, 1]], sphere_ref, [[0, 0, 1]], mode="bogus"
        )
    results, misses = pierce_all(
        np.empty((0, 3)), np.empty((0, 3)), sphere_ref, np.empty((0, 3))
    )
    assert results == [] and misses == []
