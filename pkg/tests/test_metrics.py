import math

import numpy as np
import pytest

import bwrmesh as bw
from bwrmesh.metrics import (
    CSV_HEADER,
    MeshDistanceQuery,
    _point_triangle_distances,
    format_csv,
    sample_surface,
)


def test_psnr_known_values():
    assert abs(bw.psnr(55.08, 0.002883) - 85.62) < 0.01
    assert abs(bw.psnr(36.47, 0.001435) - 88.10) < 0.01
    assert bw.psnr(1.0, 1.0) == 0.0


def test_psnr_rejects_non_positive():
    with pytest.raises(ValueError):
        bw.psnr(0.0, 1.0)
    with pytest.raises(ValueError):
        bw.psnr(1.0, 0.0)
    with pytest.raises(ValueError):
        bw.psnr(1.0, -2.0)


def test_point_triangle_distance_regions():
    a = np.array([[0.0, 0.0, 0.0]])
    b = np.array([[1.0, 0.0, 0.0]])
    c = np.array([[0.0, 1.0, 0.0]])
    # face region
    assert np.isclose(_point_triangle_distances(np.array([0.25, 0.25, 1.0]), a, b, c)[0], 1.0)
    # vertex region
    assert np.isclose(
        _point_triangle_distances(np.array([-1.0, -1.0, 0.0]), a, b, c)[0],
        math.sqrt(2.0),
    )
    # edge region
    assert np.isclose(
        _point_triangle_distances(np.array([0.5, -1.0, 0.0]), a, b, c)[0], 1.0
    )
    # hypotenuse region
    assert np.isclose(
        _point_triangle_distances(np.array([1.0, 1.0, 0.0]), a, b, c)[0],
        math.sqrt(2.0) / 2.0,
    )


def test_mesh_distance_query_exact_on_sphere(sphere_ref):
    q = MeshDistanceQuery(sphere_ref)
    # the center of the sphere is at distance ~1 minus the facet sagitta
    d = q.distances(np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 2.0]]))
    assert 0.9 < d[0] <= 1.0
    assert np.isclose(d[1], 1.0)  # touches the north pole vertex


def test_sampling_deterministic(sphere_ref):
    p1 = sample_surface(sphere_ref, seed=123)
    p2 = sample_surface(sphere_ref, seed=123)
    assert np.array_equal(p1, p2)
    p3 = sample_surface(sphere_ref, seed=124)
    assert not np.array_equal(p1, p3)


def test_sampling_includes_vertices(sphere_ref):
    pts = sample_surface(sphere_ref)
    assert np.array_equal(pts[: sphere_ref.n_vertices], sphere_ref.vertices)


def test_identical_meshes_zero_distance(sphere_ref):
    rep = bw.surface_distance(sphere_ref, sphere_ref)
    assert rep.mean_fwd == rep.rms_fwd == rep.max_fwd == 0.0
    assert rep.l2_error == 0.0
    assert math.isinf(rep.psnr_db)


def test_translated_cube_max_distance(cube):
    moved = bw.TriangleMesh(cube.vertices + [0.1, 0.0, 0.0], cube.faces)
    rep = bw.surface_distance(cube, moved, density=4000.0, seed=1)
    assert abs(rep.max_fwd - 0.1) < 1e-3
    assert abs(rep.hausdorff - 0.1) < 1e-3


def test_swap_exchanges_directions(coarse_sphere, sphere_ref):
    r1 = bw.surface_distance(coarse_sphere, sphere_ref, bbox_diag=2.0)
    r2 = bw.surface_distance(sphere_ref, coarse_sphere, bbox_diag=2.0)
    assert r1.mean_fwd == r2.mean_bwd
    assert r1.rms_fwd == r2.rms_bwd
    assert r1.max_fwd == r2.max_bwd
    assert r1.l2_error == r2.l2_error


def test_report_invariants(coarse_sphere, sphere_ref):
    rep = bw.surface_distance(coarse_sphere, sphere_ref)
    assert rep.max_fwd >= rep.rms_fwd >= rep.mean_fwd >= 0.0
    assert rep.max_bwd >= rep.rms_bwd >= rep.mean_bwd >= 0.0
    assert np.isclose(rep.psnr_db, bw.psnr(sphere_ref.bbox().diagonal, rep.l2_error))


def test_sampling_convergence(coarse_sphere, sphere_ref):
    base = bw.surface_distance(coarse_sphere, sphere_ref, density=500.0)
    dense = bw.surface_distance(coarse_sphere, sphere_ref, density=1000.0)
    assert abs(dense.rms_fwd - base.rms_fwd) / base.rms_fwd < 0.02


def test_pooling_switch(coarse_sphere, sphere_ref):
    sym = bw.surface_distance(coarse_sphere, sphere_ref, pooling="symmetric")
    mx = bw.surface_distance(coarse_sphere, sphere_ref, pooling="max-directional")
    assert mx.l2_error == max(mx.rms_fwd, mx.rms_bwd)
    assert sym.l2_error <= mx.l2_error + 1e-15
    with pytest.raises(ValueError):
        bw.surface_distance(coarse_sphere, sphere_ref, pooling="median")


def test_csv_format(coarse_sphere, sphere_ref):
    rep = bw.surface_distance(coarse_sphere, sphere_ref)
    text = format_csv([rep.row(level=2, bpv=0.5)])
    lines = text.strip().split("\n")
    assert lines[0] == CSV_HEADER
    fields = lines[1].split(",")
    assert fields[0] == "2" and fields[1] == "0.5"
    assert len(fields) == len(CSV_HEADER.split(","))


def test_rd_curve_empty_grid(sphere_hierarchy, sphere_ref):
    stream = bw.encode_hierarchy(sphere_hierarchy)
    rows, path = bw.rd_curve(stream, sphere_ref, [1, 2], [])
    assert rows == [] and path == []


def test_rd_curve_rows_and_path(sphere_hierarchy, sphere_ref):
    stream = bw.encode_hierarchy(sphere_hierarchy)
    mk = dict(density=200.0)
    rows, path = bw.rd_curve(stream, sphere_ref, [2, 3], [0.25, 1.0], mk)
    assert len(rows) == 4
    for level in (2, 3):
        sub = [r for r in rows if r["level"] == level]
        assert sub[0]["psnr_db"] <= sub[1]["psnr_db"] + 1e-9
    assert path and all("budget_bits" in p for p in path)
    budgets = [p["budget_bits"] for p in path]
    psnrs = [p["psnr_db"] for p in path]
    assert budgets == sorted(budgets)
    assert all(b >= a - 1e-12 for a, b in zip(psnrs, psnrs[1:]))
