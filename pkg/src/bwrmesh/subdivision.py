"""Midpoint (1-to-4) subdivision with edge-tree bookkeeping and directions.

Each parent edge i produces one new vertex (index ``parent.n_vertices + i``)
and owns exactly four child edges.  The child slots are, in order:

  1. the half of the parent edge touching its lower endpoint,
  2. the half touching its upper endpoint,
  3. an interior edge of the lower-indexed adjacent face touching the midpoint,
  4. the same for the higher-indexed adjacent face.

Interior edges are matched to parent edges greedily per face (interior edges
sorted by their incident parent-edge pair, each claimed by the lowest-indexed
unclaimed parent edge), which yields a deterministic bijection onto all child
edges.  Everything here is a pure function of the parent face list, so a
decoder reproduces the tree and the direction field with no side information.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OpenMeshError
from .mesh import TriangleMesh

PROV_BUTTERFLY = 0
PROV_NORMAL_FALLBACK = 1
PROV_RETRY_MIDNORMAL = 2
PROV_RETRY_ENDPOINT_A = 3
PROV_RETRY_ENDPOINT_B = 4

PROVENANCE_NAMES = {
    PROV_BUTTERFLY: "butterfly",
    PROV_NORMAL_FALLBACK: "normal-fallback",
    PROV_RETRY_MIDNORMAL: "retry-midpoint-normal",
    PROV_RETRY_ENDPOINT_A: "retry-endpoint-a",
    PROV_RETRY_ENDPOINT_B: "retry-endpoint-b",
}


@dataclass(frozen=True)
class DirectionConfig:
    """Thresholds for the flat/crease fallback of the direction field."""

    eps_s: float = 1e-3          # |raw s| below eps_s * mean stencil edge length
    theta_crease_deg: float = 50.0
    theta_tilt_deg: float = 70.0
    eps_parallel: float = 1e-12
    eps_bary: float = 1e-10
    fold_floor_deg: float = 5.0

    def as_tuple(self):
        return (
            self.eps_s,
            self.theta_crease_deg,
            self.theta_tilt_deg,
            self.eps_parallel,
            self.eps_bary,
            self.fold_floor_deg,
        )

    @classmethod
    def from_tuple(cls, values):
        return cls(*values)


class SubdivisionStep:
    """One midpoint refinement: parent mesh, child connectivity, edge tree."""

    def __init__(self, parent: TriangleMesh):
        if not parent.is_closed():
            raise OpenMeshError("midpoint subdivision requires a closed mesh")
        self.parent = parent
        nv = parent.n_vertices
        edges = parent.edges
        verts = parent.vertices

        midpoints = 0.5 * (verts[edges[:, 0]] + verts[edges[:, 1]])
        child_vertices = np.vstack([verts, midpoints])

        f = parent.faces
        # midpoint vertex index per face corner edge
        m01 = nv + _edge_ids(parent, f[:, 0], f[:, 1])
        m12 = nv + _edge_ids(parent, f[:, 1], f[:, 2])
        m20 = nv + _edge_ids(parent, f[:, 2], f[:, 0])
        child_faces = np.empty((4 * len(f), 3), dtype=np.int64)
        child_faces[0::4] = np.column_stack([f[:, 0], m01, m20])
        child_faces[1::4] = np.column_stack([m01, f[:, 1], m12])
        child_faces[2::4] = np.column_stack([m20, m12, f[:, 2]])
        child_faces[3::4] = np.column_stack([m01, m12, m20])

        self.child = TriangleMesh(child_vertices, child_faces, validate=False)
        self.midpoints = midpoints
        self.child_edges_of = self._build_edge_tree(m01, m12, m20)
        self._stencils = None

    # -- edge tree --------------------------------------------------------------

    def _build_edge_tree(self, m01, m12, m20):
        parent = self.parent
        child = self.child
        nv = parent.n_vertices
        edges = parent.edges
        tree = np.empty((parent.n_edges, 4), dtype=np.int64)

        # slots 1 and 2: the two halves of the parent edge
        for i, (a, b) in enumerate(edges):
            mid = nv + i
            tree[i, 0] = child.edge_index(int(a), mid)
            tree[i, 1] = child.edge_index(mid, int(b))

        # interior edges, matched per face
        slot3 = {}
        for fi, face in enumerate(parent.faces):
            ea = parent.edge_index(int(face[0]), int(face[1]))
            eb = parent.edge_index(int(face[1]), int(face[2]))
            ec = parent.edge_index(int(face[2]), int(face[0]))
            mids = {ea: int(m01[fi]), eb: int(m12[fi]), ec: int(m20[fi])}
            pairs = sorted(
                [tuple(sorted(p)) for p in ((ea, eb), (eb, ec), (ec, ea))]
            )
            claimed = set()
            for lo, hi in pairs:
                owner = lo if lo not in claimed else hi
                claimed.add(owner)
                other = hi if owner == lo else lo
                interior = child.edge_index(mids[owner], mids[other])
                slot3.setdefault(owner, []).append((fi, interior))
        for e, entries in slot3.items():
            entries.sort()  # lower-indexed adjacent face -> slot 3
            tree[e, 2] = entries[0][1]
            tree[e, 3] = entries[1][1]
        return tree

    # -- butterfly stencils -------------------------------------------------------

    def butterfly_stencils(self) -> tuple[np.ndarray, np.ndarray]:
        """(E, 8) stencil vertex indices plus per-edge completeness flags.

        p1, p2 are the parent edge endpoints; p3, p4 the opposite vertices of
        the two incident faces (lower face index first); p5..p8 the wings
        across (p1,p3), (p2,p3), (p1,p4), (p2,p4).  A stencil is complete
        only when all eight indices are distinct.
        """
        if self._stencils is not None:
            return self._stencils
        parent = self.parent
        edges = parent.edges
        ef = parent.edge_faces
        faces = parent.faces
        E = parent.n_edges
        stencil = np.full((E, 8), -1, dtype=np.int64)
        stencil[:, 0] = edges[:, 0]
        stencil[:, 1] = edges[:, 1]
        for i in range(E):
            a, b = int(edges[i, 0]), int(edges[i, 1])
            f1, f2 = int(ef[i, 0]), int(ef[i, 1])
            p3 = _opposite_vertex(faces[f1], a, b)
            p4 = _opposite_vertex(faces[f2], a, b)
            stencil[i, 2] = p3
            stencil[i, 3] = p4
            stencil[i, 4] = self._wing(a, p3, f1)
            stencil[i, 5] = self._wing(b, p3, f1)
            stencil[i, 6] = self._wing(a, p4, f2)
            stencil[i, 7] = self._wing(b, p4, f2)
        complete = np.array(
            [row.min() >= 0 and len(set(row.tolist())) == 8 for row in stencil],
            dtype=bool,
        )
        self._stencils = (stencil, complete)
        return self._stencils

    def _wing(self, u, v, avoid_face):
        parent = self.parent
        e = parent.edge_index(u, v)
        f1, f2 = parent.edge_faces[e]
        other = int(f2) if int(f1) == avoid_face else int(f1)
        if other < 0:
            return -1
        return _opposite_vertex(parent.faces[other], u, v)

    def butterfly_stencil(self, new_vertex: int):
        """Stencil for one new vertex id; returns (indices, complete)."""
        edge = new_vertex - self.parent.n_vertices
        if edge < 0 or edge >= self.parent.n_edges:
            raise IndexError(f"vertex {new_vertex} is not a new vertex of this step")
        stencil, complete = self.butterfly_stencils()
        return stencil[edge], bool(complete[edge])

    # -- direction field ------------------------------------------------------------

    def direction_field(self, config: DirectionConfig):
        """Unit direction per new vertex plus provenance codes.

        Complete stencils in non-flat, non-crease regions use the butterfly
        direction 2(p3+p4) - (p5+p6+p7+p8); everything else falls back to the
        parent-edge midpoint normal.
        """
        parent = self.parent
        verts = parent.vertices
        stencil, complete = self.butterfly_stencils()
        n_m = parent.midpoint_normals()

        directions = n_m.copy()
        provenance = np.full(parent.n_edges, PROV_NORMAL_FALLBACK, dtype=np.uint8)

        idx = np.flatnonzero(complete)
        if idx.size:
            s = stencil[idx]
            raw = 2.0 * (verts[s[:, 2]] + verts[s[:, 3]]) - (
                verts[s[:, 4]] + verts[s[:, 5]] + verts[s[:, 6]] + verts[s[:, 7]]
            )
            raw_len = np.linalg.norm(raw, axis=1)
            mean_edge = self._mean_stencil_edge_length(s)
            degenerate = raw_len < config.eps_s * mean_edge

            unit = raw.copy()
            safe = np.where(raw_len == 0.0, 1.0, raw_len)
            unit /= safe[:, None]
            cos_tilt = np.einsum("ij,ij->i", unit, n_m[idx])
            tilted = cos_tilt < np.cos(np.deg2rad(config.theta_tilt_deg))

            creased = self._crease_flags(idx, n_m, config)

            ok = ~(degenerate | tilted | creased)
            sel = idx[ok]
            directions[sel] = unit[ok]
            provenance[sel] = PROV_BUTTERFLY
        return directions, provenance

    def _mean_stencil_edge_length(self, s):
        # mean length over the edges drawn in the butterfly figure
        verts = self.parent.vertices
        pairs = [
            (0, 1), (0, 2), (1, 2), (0, 3), (1, 3),
            (0, 4), (2, 4), (1, 5), (2, 5), (0, 6), (3, 6), (1, 7), (3, 7),
        ]
        total = np.zeros(len(s))
        for u, v in pairs:
            total += np.linalg.norm(verts[s[:, u]] - verts[s[:, v]], axis=1)
        return total / len(pairs)

    def _crease_flags(self, idx, n_m, config):
        """True where any stencil face normal deviates too far from n_m."""
        parent = self.parent
        fn = parent.face_normals()
        ef = parent.edge_faces
        stencil, _ = self.butterfly_stencils()
        cos_floor = np.cos(np.deg2rad(config.theta_crease_deg))
        flags = np.zeros(len(idx), dtype=bool)
        for k, e in enumerate(idx):
            a, b = int(parent.edges[e, 0]), int(parent.edges[e, 1])
            p3, p4 = int(stencil[e, 2]), int(stencil[e, 3])
            face_ids = {int(ef[e, 0]), int(ef[e, 1])}
            for u, v, avoid in ((a, p3, 0), (b, p3, 0), (a, p4, 1), (b, p4, 1)):
                we = parent.edge_index(u, v)
                f1, f2 = int(ef[we, 0]), int(ef[we, 1])
                face_ids.update((f1, f2))
            face_ids.discard(-1)
            cosines = fn[sorted(face_ids)] @ n_m[e]
            flags[k] = bool(np.min(cosines) < cos_floor)
        return flags


def midpoint_subdivide(parent: TriangleMesh) -> SubdivisionStep:
    return SubdivisionStep(parent)


def subdivided_counts(v0: int, e0: int, f0: int, levels: int):
    """Closed-mesh vertex/edge/face counts after ``levels`` subdivisions."""
    v, e, f = v0, e0, f0
    for _ in range(levels):
        v, e, f = v + e, 4 * e, 4 * f
    return v, e, f


def _edge_ids(mesh: TriangleMesh, a, b):
    return np.fromiter(
        (mesh.edge_index(int(u), int(v)) for u, v in zip(a, b)),
        count=len(a),
        dtype=np.int64,
    )


def _opposite_vertex(face, a, b):
    for v in face:
        if v != a and v != b:
            return int(v)
    raise ValueError("degenerate face")
