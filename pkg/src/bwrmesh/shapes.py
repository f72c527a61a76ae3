"""Procedural closed test meshes: octahedron, spheres, torus.

Both sphere tilings contain the six axis extrema (+-x, +-y, +-z) exactly, so
the axis-extrema base picker lands on identical coordinates regardless of
which tiling represents the surface.
"""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh

_OCTA_FACES = np.array(
    [
        [0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1],
        [5, 2, 1], [5, 3, 2], [5, 4, 3], [5, 1, 4],
    ],
    dtype=np.int64,
)


def octahedron(radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Regular octahedron; vertex order top, right, front, left, back, bottom."""
    v = radius * np.array(
        [
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, -1.0],
        ]
    )
    return TriangleMesh(v + np.asarray(center, dtype=np.float64), _OCTA_FACES)


def icosahedron(radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Regular icosahedron inscribed in the given sphere."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    raw = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return TriangleMesh(raw * radius + np.asarray(center, dtype=np.float64), faces)


def icosphere(
    subdivisions: int = 3,
    radius: float = 1.0,
    center=(0.0, 0.0, 0.0),
    base: str = "octahedron",
) -> TriangleMesh:
    """Sphere from midpoint-subdividing a platonic base and reprojecting.

    With the default octahedron base, the octahedron vertices are fixed
    points of the projection, so the six axis extrema survive every
    subdivision exactly.  ``base="icosahedron"`` trades that property for a
    more uniform tiling (20*4^n faces).
    """
    if base == "octahedron":
        mesh = octahedron()
    elif base == "icosahedron":
        mesh = icosahedron()
    else:
        raise ValueError(f"unknown icosphere base {base!r}")
    for _ in range(subdivisions):
        from .subdivision import SubdivisionStep

        child = SubdivisionStep(mesh).child
        v = child.vertices.copy()
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        mesh = TriangleMesh(v, child.faces, validate=False)
    v = mesh.vertices * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(v, mesh.faces)


def uv_sphere(
    meridians: int = 16,
    rings: int = 8,
    radius: float = 1.0,
    center=(0.0, 0.0, 0.0),
) -> TriangleMesh:
    """Latitude/longitude sphere triangulation with exact axis extrema.

    ``meridians`` must be a multiple of 4 and ``rings`` even so the equator
    and the four equatorial axis points are part of the tiling.
    """
    if meridians % 4 != 0 or meridians < 4:
        raise ValueError("meridians must be a positive multiple of 4")
    if rings % 2 != 0 or rings < 2:
        raise ValueError("rings must be a positive even number")
    verts = [(0.0, 0.0, 1.0)]
    for i in range(1, rings):
        theta = np.pi * i / rings
        st, ct = np.sin(theta), np.cos(theta)
        for k in range(meridians):
            phi = 2.0 * np.pi * k / meridians
            verts.append((st * np.cos(phi), st * np.sin(phi), ct))
    verts.append((0.0, 0.0, -1.0))
    v = np.array(verts, dtype=np.float64)
    v[np.abs(v) < 1e-12] = 0.0  # snap near-zero coordinates from pi roundoff
    v /= np.linalg.norm(v, axis=1, keepdims=True)

    faces = []
    south = len(v) - 1

    def ring_vertex(i, k):
        return 1 + (i - 1) * meridians + (k % meridians)

    for k in range(meridians):
        faces.append([0, ring_vertex(1, k), ring_vertex(1, k + 1)])
    for i in range(1, rings - 1):
        for k in range(meridians):
            a, b = ring_vertex(i, k), ring_vertex(i, k + 1)
            c, d = ring_vertex(i + 1, k), ring_vertex(i + 1, k + 1)
            faces.append([a, c, d])
            faces.append([a, d, b])
    for k in range(meridians):
        faces.append([south, ring_vertex(rings - 1, k + 1), ring_vertex(rings - 1, k)])
    v = v * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(v, np.array(faces, dtype=np.int64))


def torus(
    major_radius: float = 1.0,
    minor_radius: float = 0.35,
    major_segments: int = 24,
    minor_segments: int = 12,
    center=(0.0, 0.0, 0.0),
) -> TriangleMesh:
    """Genus-1 ring torus around the z axis."""
    if major_segments < 3 or minor_segments < 3:
        raise ValueError("torus needs at least 3 segments per loop")
    verts = []
    for i in range(major_segments):
        u = 2.0 * np.pi * i / major_segments
        cu, su = np.cos(u), np.sin(u)
        for j in range(minor_segments):
            w = 2.0 * np.pi * j / minor_segments
            r = major_radius + minor_radius * np.cos(w)
            verts.append((r * cu, r * su, minor_radius * np.sin(w)))
    faces = []
    for i in range(major_segments):
        for j in range(minor_segments):
            a = i * minor_segments + j
            b = i * minor_segments + (j + 1) % minor_segments
            c = ((i + 1) % major_segments) * minor_segments + j
            d = ((i + 1) % major_segments) * minor_segments + (j + 1) % minor_segments
            faces.append([a, c, d])
            faces.append([a, d, b])
    v = np.array(verts, dtype=np.float64) + np.asarray(center, dtype=np.float64)
    return TriangleMesh(v, np.array(faces, dtype=np.int64))
