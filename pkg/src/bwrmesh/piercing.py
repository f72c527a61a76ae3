"""Line-surface piercing: place midpoints onto the reference surface.

Given an origin and a unit direction, every triangle of the reference mesh
pierced by the infinite line contributes a candidate scalar w.  The winner is
the smallest w >= 0 or the largest w < 0; when both exist the candidate whose
face normal agrees best with the midpoint normal is kept.  ``pierce_all``
offers a full-search mode (the oracle, every ray against every face) and a
BVH-accelerated mode that must return identical results.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import MeshValidationError, PierceMissError
from .mesh import TriangleMesh
from .subdivision import DirectionConfig

PROV_UNIQUE = "unique"
PROV_CHOSE_POSITIVE = "chose-positive"
PROV_CHOSE_NEGATIVE = "chose-negative"


@dataclass
class PierceResult:
    w: float
    face: int
    bary: tuple[float, float, float]
    point: np.ndarray
    provenance: str


def ray_plane_intersect(origin, direction, triangle, eps_parallel: float = 1e-12):
    """Scalar w with origin + w*direction on the triangle's plane, or None."""
    v1, v2, v3 = np.asarray(triangle, dtype=np.float64)
    n = np.cross(v2 - v1, v3 - v1)
    n_len = np.linalg.norm(n)
    if n_len == 0.0:
        raise MeshValidationError("degenerate reference triangle")
    denom = float(np.dot(n, direction))
    if abs(denom) < eps_parallel * n_len:
        return None
    return float(np.dot(n, v1 - np.asarray(origin, dtype=np.float64)) / denom)


def barycentric(point, triangle, eps_bary: float = 1e-10):
    """(alpha, beta, gamma) of the affine combination plus an inside flag."""
    v1, v2, v3 = np.asarray(triangle, dtype=np.float64)
    p = np.asarray(point, dtype=np.float64)
    e1 = v2 - v1
    e2 = v3 - v1
    d = p - v1
    d11 = np.dot(e1, e1)
    d12 = np.dot(e1, e2)
    d22 = np.dot(e2, e2)
    det = d11 * d22 - d12 * d12
    if det == 0.0:
        raise MeshValidationError("degenerate reference triangle")
    b = (d22 * np.dot(d, e1) - d12 * np.dot(d, e2)) / det
    g = (d11 * np.dot(d, e2) - d12 * np.dot(d, e1)) / det
    a = 1.0 - b - g
    inside = a >= -eps_bary and b >= -eps_bary and g >= -eps_bary
    return (float(a), float(b), float(g)), bool(inside)


# -- vectorized candidate generation -------------------------------------------


class _RefGeometry:
    """Precomputed reference triangles for vectorized intersection tests."""

    def __init__(self, reference: TriangleMesh):
        v = reference.vertices
        f = reference.faces
        self.v1 = v[f[:, 0]]
        self.e1 = v[f[:, 1]] - self.v1
        self.e2 = v[f[:, 2]] - self.v1
        self.normal = np.cross(self.e1, self.e2)
        self.n_len = np.linalg.norm(self.normal, axis=1)
        if np.any(self.n_len == 0.0):
            bad = int(np.argmax(self.n_len == 0.0))
            raise MeshValidationError(f"reference face {bad} is degenerate")
        self.d11 = np.einsum("ij,ij->i", self.e1, self.e1)
        self.d12 = np.einsum("ij,ij->i", self.e1, self.e2)
        self.d22 = np.einsum("ij,ij->i", self.e2, self.e2)
        self.det = self.d11 * self.d22 - self.d12 * self.d12

    def intersect(self, origin, direction, face_ids, config: DirectionConfig):
        """Candidate (w, face, alpha, beta, gamma) rows for one ray."""
        n = self.normal[face_ids]
        denom = n @ direction
        ok = np.abs(denom) >= config.eps_parallel * self.n_len[face_ids]
        if not np.any(ok):
            return _EMPTY_CANDIDATES
        face_ids = face_ids[ok]
        n = n[ok]
        denom = denom[ok]
        v1 = self.v1[face_ids]
        w = np.einsum("ij,ij->i", n, v1 - origin) / denom
        p = origin + w[:, None] * direction
        d = p - v1
        de1 = np.einsum("ij,ij->i", d, self.e1[face_ids])
        de2 = np.einsum("ij,ij->i", d, self.e2[face_ids])
        det = self.det[face_ids]
        beta = (self.d22[face_ids] * de1 - self.d12[face_ids] * de2) / det
        gamma = (self.d11[face_ids] * de2 - self.d12[face_ids] * de1) / det
        alpha = 1.0 - beta - gamma
        eps = config.eps_bary
        inside = (alpha >= -eps) & (beta >= -eps) & (gamma >= -eps)
        if not np.any(inside):
            return _EMPTY_CANDIDATES
        return (
            w[inside],
            face_ids[inside],
            alpha[inside],
            beta[inside],
            gamma[inside],
        )


_EMPTY_CANDIDATES = (
    np.empty(0),
    np.empty(0, dtype=np.int64),
    np.empty(0),
    np.empty(0),
    np.empty(0),
)


def _select_candidate(candidates, midpoint_normal, face_normals, origin, direction):
    """Apply the two-nearest-intersections rule to one ray's candidate set."""
    w, faces, alpha, beta, gamma = candidates
    if len(w) == 0:
        return None
    order = np.lexsort((faces, w))  # ties on w resolved to the lowest face index
    w, faces = w[order], faces[order]
    alpha, beta, gamma = alpha[order], beta[order], gamma[order]

    pos = np.flatnonzero(w >= 0.0)
    neg = np.flatnonzero(w < 0.0)
    i_pos = int(pos[0]) if pos.size else None       # smallest w >= 0
    i_neg = int(neg[-1]) if neg.size else None      # largest w < 0

    if i_pos is not None and i_neg is not None:
        dot_pos = float(face_normals[faces[i_pos]] @ midpoint_normal)
        dot_neg = float(face_normals[faces[i_neg]] @ midpoint_normal)
        if dot_pos > dot_neg:
            pick, prov = i_pos, PROV_CHOSE_POSITIVE
        elif dot_neg > dot_pos:
            pick, prov = i_neg, PROV_CHOSE_NEGATIVE
        else:
            # tie: prefer the nearer candidate, then the non-negative one
            if abs(w[i_pos]) < abs(w[i_neg]):
                pick, prov = i_pos, PROV_CHOSE_POSITIVE
            elif abs(w[i_neg]) < abs(w[i_pos]):
                pick, prov = i_neg, PROV_CHOSE_NEGATIVE
            else:
                pick, prov = i_pos, PROV_CHOSE_POSITIVE
    else:
        pick = i_pos if i_pos is not None else i_neg
        prov = PROV_UNIQUE

    point = origin + w[pick] * direction
    return PierceResult(
        w=float(w[pick]),
        face=int(faces[pick]),
        bary=(float(alpha[pick]), float(beta[pick]), float(gamma[pick])),
        point=point,
        provenance=prov,
    )


def pierce(
    origin,
    direction,
    reference: TriangleMesh,
    midpoint_normal,
    config: DirectionConfig | None = None,
    geometry: _RefGeometry | None = None,
) -> PierceResult:
    config = config or DirectionConfig()
    geometry = geometry or _RefGeometry(reference)
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    all_faces = np.arange(reference.n_faces, dtype=np.int64)
    candidates = geometry.intersect(origin, direction, all_faces, config)
    result = _select_candidate(
        candidates,
        np.asarray(midpoint_normal, dtype=np.float64),
        reference.face_normals(),
        origin,
        direction,
    )
    if result is None:
        raise PierceMissError("direction line misses every reference triangle")
    return result


# -- BVH ------------------------------------------------------------------------


class Bvh:
    """Median-split AABB hierarchy over reference faces (leaf size 8)."""

    LEAF_SIZE = 8

    def __init__(self, reference: TriangleMesh):
        f = reference.faces
        v = reference.vertices
        tri = v[f]  # (F, 3, 3)
        # pad boxes so edge-grazing lines whose hit only passes the
        # barycentric tolerance still see both incident faces
        pad = 1e-9 * float(np.linalg.norm(v.max(axis=0) - v.min(axis=0)))
        self.tri_min = tri.min(axis=1) - pad
        self.tri_max = tri.max(axis=1) + pad
        centroids = tri.mean(axis=1)

        n = len(f)
        order = np.arange(n, dtype=np.int64)
        # nodes: (min, max, left, right, start, count); leaves have left = -1
        self.node_min = []
        self.node_max = []
        self.node_left = []
        self.node_right = []
        self.node_start = []
        self.node_count = []
        self.face_order = order
        self._build(centroids, 0, n)
        self.node_min = np.array(self.node_min)
        self.node_max = np.array(self.node_max)
        self.node_left = np.array(self.node_left, dtype=np.int64)
        self.node_right = np.array(self.node_right, dtype=np.int64)
        self.node_start = np.array(self.node_start, dtype=np.int64)
        self.node_count = np.array(self.node_count, dtype=np.int64)

    def _build(self, centroids, start, end):
        node = len(self.node_min)
        idx = self.face_order[start:end]
        self.node_min.append(self.tri_min[idx].min(axis=0))
        self.node_max.append(self.tri_max[idx].max(axis=0))
        self.node_left.append(-1)
        self.node_right.append(-1)
        self.node_start.append(start)
        self.node_count.append(end - start)
        if end - start <= self.LEAF_SIZE:
            return node
        c = centroids[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        mid = (end - start) // 2
        # stable split keyed by (coordinate, face id) for determinism
        keys = np.lexsort((idx, c[:, axis]))
        self.face_order[start:end] = idx[keys]
        left = self._build(centroids, start, start + mid)
        right = self._build(centroids, start + mid, end)
        self.node_left[node] = left
        self.node_right[node] = right
        return node

    def line_candidate_faces(self, origin, direction):
        """All faces whose AABB intersects the infinite line, ascending order.

        Breadth-first traversal; each wave of nodes runs one vectorized slab
        test (t unrestricted in sign since the line is infinite).
        """
        zero = direction == 0.0
        with np.errstate(divide="ignore"):
            inv = np.where(zero, np.inf, 1.0 / direction)
        hits = []
        frontier = np.array([0], dtype=np.int64)
        while frontier.size:
            bmin = self.node_min[frontier]
            bmax = self.node_max[frontier]
            with np.errstate(invalid="ignore"):
                t1 = (bmin - origin) * inv
                t2 = (bmax - origin) * inv
            if zero.any():
                # zero-direction axes reduce to a containment test
                t1 = np.where(zero, -np.inf, t1)
                t2 = np.where(zero, np.inf, t2)
                contained = np.all(
                    ~zero | ((origin >= bmin) & (origin <= bmax)), axis=1
                )
            else:
                contained = True
            lo = np.minimum(t1, t2).max(axis=1)
            hi = np.maximum(t1, t2).min(axis=1)
            hit = frontier[(lo <= hi) & contained]
            is_leaf = self.node_left[hit] < 0
            for node in hit[is_leaf]:
                s = self.node_start[node]
                hits.append(self.face_order[s : s + self.node_count[node]])
            inner = hit[~is_leaf]
            frontier = np.concatenate(
                [self.node_left[inner], self.node_right[inner]]
            )
        if not hits:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(hits))


# -- batch interface --------------------------------------------------------------


def pierce_all(
    origins,
    directions,
    reference: TriangleMesh,
    midpoint_normals,
    mode: str = "accelerated",
    config: DirectionConfig | None = None,
    threads: int = 1,
):
    """Pierce many rays; returns (results, miss_indices).

    ``results[i]`` is a PierceResult or None for misses; miss indices are also
    aggregated.  Output order always matches input order, at any thread count.
    """
    config = config or DirectionConfig()
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    midpoint_normals = np.asarray(midpoint_normals, dtype=np.float64).reshape(-1, 3)
    if mode not in ("full-search", "accelerated"):
        raise ValueError(f"unknown pierce mode {mode!r}")
    m = len(origins)
    if m == 0:
        return [], []

    geometry = _RefGeometry(reference)
    face_normals = reference.face_normals()
    bvh = Bvh(reference) if mode == "accelerated" else None
    all_faces = np.arange(reference.n_faces, dtype=np.int64)

    def run_one(i):
        o, d = origins[i], directions[i]
        faces = bvh.line_candidate_faces(o, d) if bvh is not None else all_faces
        cands = geometry.intersect(o, d, faces, config)
        return _select_candidate(cands, midpoint_normals[i], face_normals, o, d)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_one, range(m)))
    else:
        results = [run_one(i) for i in range(m)]
    misses = [i for i, r in enumerate(results) if r is None]
    return results, misses
