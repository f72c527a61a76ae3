"""Indexed triangle mesh with validated connectivity and discrete normals.

The mesh is immutable after construction.  Edge enumeration is a pure
function of the face list: endpoints are sorted ascending per edge and the
edge list is sorted lexicographically, so identical face lists always yield
identical edge orderings regardless of platform or history.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    MeshParseError,
    MeshValidationError,
    NonOrientableMeshError,
    OpenMeshError,
)


@dataclass(frozen=True)
class BBox:
    min_corner: np.ndarray
    max_corner: np.ndarray

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.max_corner - self.min_corner))


class TriangleMesh:
    """Immutable indexed triangle mesh (counter-clockwise faces)."""

    def __init__(self, vertices, faces, validate: bool = True):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshValidationError(
                f"vertices must be (n, 3), got {self.vertices.shape}"
            )
        if self.faces.size and (self.faces.ndim != 2 or self.faces.shape[1] != 3):
            raise MeshValidationError(f"faces must be (m, 3), got {self.faces.shape}")
        if self.faces.size == 0:
            self.faces = self.faces.reshape(0, 3)
        if validate:
            self._validate_basic()
        self._edges, self._edge_faces = self._build_edges()
        self._edge_lookup = None
        self._vertex_normals = None
        self.vertices.flags.writeable = False
        self.faces.flags.writeable = False

    # -- construction helpers -------------------------------------------------

    def _validate_basic(self):
        if self.faces.size == 0:
            return
        bad = np.flatnonzero((self.faces < 0) | (self.faces >= len(self.vertices)))
        if bad.size:
            f, c = divmod(int(bad[0]), 3)
            raise MeshValidationError(
                f"face {f} references out-of-range vertex index {self.faces[f, c]}"
            )
        a, b, c = self.faces.T
        degen = np.flatnonzero((a == b) | (b == c) | (a == c))
        if degen.size:
            raise MeshValidationError(
                f"face {int(degen[0])} is degenerate: {self.faces[degen[0]].tolist()}"
            )

    def _build_edges(self):
        if self.faces.size == 0:
            return np.zeros((0, 2), dtype=np.int64), np.zeros((0, 2), dtype=np.int64)
        raw = self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        raw_sorted = np.sort(raw, axis=1)
        edges, inverse = np.unique(raw_sorted, axis=0, return_inverse=True)
        counts = np.bincount(inverse, minlength=len(edges))
        if counts.max(initial=0) > 2:
            bad = int(np.argmax(counts > 2))
            raise MeshValidationError(
                f"non-manifold edge {tuple(edges[bad])} shared by {counts[bad]} faces"
            )
        edge_faces = np.full((len(edges), 2), -1, dtype=np.int64)
        face_of_halfedge = np.repeat(np.arange(len(self.faces)), 3)
        # fill sequentially so the lower face index always lands in column 0
        for he, e in enumerate(inverse):
            if edge_faces[e, 0] < 0:
                edge_faces[e, 0] = face_of_halfedge[he]
            else:
                edge_faces[e, 1] = face_of_halfedge[he]
        return edges, edge_faces

    # -- basic queries ---------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_edges(self) -> int:
        return len(self._edges)

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted index pairs, lexicographically ordered."""
        return self._edges

    @property
    def edge_faces(self) -> np.ndarray:
        """Per edge the 1 or 2 incident face indices (-1 when boundary)."""
        return self._edge_faces

    def edge_index(self, a: int, b: int) -> int:
        if self._edge_lookup is None:
            self._edge_lookup = {
                (int(u), int(v)): i for i, (u, v) in enumerate(self._edges)
            }
        key = (a, b) if a < b else (b, a)
        try:
            return self._edge_lookup[key]
        except KeyError:
            raise MeshValidationError(f"edge ({a}, {b}) does not exist") from None

    def is_closed(self) -> bool:
        return bool(np.all(self._edge_faces[:, 1] >= 0)) and self.n_faces > 0

    def is_orientable(self) -> bool:
        """Closed orientable iff each undirected edge is traversed once per direction."""
        raw = self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        directed = raw[:, 0] * (self.n_vertices + 1) + raw[:, 1]
        return len(np.unique(directed)) == len(directed)

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    def genus(self) -> int:
        if not self.is_closed():
            raise OpenMeshError("genus is defined here only for closed meshes")
        if not self.is_orientable():
            raise NonOrientableMeshError("mesh is not orientable")
        chi = self.euler_characteristic()
        if (2 - chi) % 2 != 0:
            raise MeshValidationError(f"Euler characteristic {chi} is not even")
        return (2 - chi) // 2

    def bbox(self) -> BBox:
        if self.n_vertices == 0:
            raise MeshValidationError("empty mesh has no bounding box")
        return BBox(self.vertices.min(axis=0), self.vertices.max(axis=0))

    # -- normals ---------------------------------------------------------------

    def face_normals(self, normalized: bool = True) -> np.ndarray:
        v = self.vertices
        f = self.faces
        n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        if normalized:
            lens = np.linalg.norm(n, axis=1, keepdims=True)
            lens[lens == 0.0] = 1.0
            n = n / lens
        return n

    def vertex_normals(self) -> np.ndarray:
        """Angle-weighted vertex normals, unit length."""
        if self._vertex_normals is not None:
            return self._vertex_normals
        v = self.vertices
        f = self.faces
        fn = self.face_normals()
        acc = np.zeros_like(v)
        for corner in range(3):
            i = f[:, corner]
            e1 = v[f[:, (corner + 1) % 3]] - v[i]
            e2 = v[f[:, (corner + 2) % 3]] - v[i]
            l1 = np.linalg.norm(e1, axis=1)
            l2 = np.linalg.norm(e2, axis=1)
            denom = np.where(l1 * l2 == 0.0, 1.0, l1 * l2)
            cosang = np.clip(np.einsum("ij,ij->i", e1, e2) / denom, -1.0, 1.0)
            ang = np.arccos(cosang)
            np.add.at(acc, i, fn * ang[:, None])
        lens = np.linalg.norm(acc, axis=1)
        isolated = lens == 0.0
        lens[isolated] = 1.0
        normals = acc / lens[:, None]
        normals[isolated] = np.nan
        self._vertex_normals = normals
        return normals

    def vertex_normal(self, vertex: int) -> np.ndarray:
        n = self.vertex_normals()[vertex]
        if np.any(np.isnan(n)):
            raise MeshValidationError(f"vertex {vertex} has no incident face")
        return n

    def midpoint_normal(self, a: int, b: int) -> np.ndarray:
        """Normalized average of the two endpoint vertex normals."""
        self.edge_index(a, b)  # existence check
        n = self.vertex_normal(a) + self.vertex_normal(b)
        length = np.linalg.norm(n)
        if length == 0.0:
            raise MeshValidationError(f"degenerate midpoint normal on edge ({a}, {b})")
        return n / length

    def midpoint_normals(self) -> np.ndarray:
        """Midpoint normals for every edge, in canonical edge order."""
        vn = self.vertex_normals()
        n = vn[self._edges[:, 0]] + vn[self._edges[:, 1]]
        lens = np.linalg.norm(n, axis=1, keepdims=True)
        lens[lens == 0.0] = 1.0
        return n / lens


def genus_check(a: TriangleMesh, b: TriangleMesh) -> bool:
    """True iff both closed orientable meshes have the same genus."""
    return a.genus() == b.genus()


# -- file I/O -------------------------------------------------------------------


def load_mesh(path, fmt: str | None = None) -> TriangleMesh:
    fmt = _resolve_format(path, fmt)
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise MeshParseError(f"cannot read {path}: {exc}") from exc
    if fmt == "off":
        vertices, faces = _parse_off(text, path)
    else:
        vertices, faces = _parse_obj(text, path)
    return TriangleMesh(vertices, faces)


def save_mesh(mesh: TriangleMesh, path, fmt: str | None = None) -> None:
    fmt = _resolve_format(path, fmt)
    lines = []
    if fmt == "off":
        lines.append("OFF")
        lines.append(f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}")
        for v in mesh.vertices:
            lines.append("%.17g %.17g %.17g" % (v[0], v[1], v[2]))
        for f in mesh.faces:
            lines.append(f"3 {f[0]} {f[1]} {f[2]}")
    else:
        for v in mesh.vertices:
            lines.append("v %.17g %.17g %.17g" % (v[0], v[1], v[2]))
        for f in mesh.faces:
            lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _resolve_format(path, fmt):
    if fmt is None:
        fmt = os.path.splitext(str(path))[1].lstrip(".").lower() or "off"
    fmt = fmt.lower()
    if fmt not in ("off", "obj"):
        raise MeshParseError(f"unsupported mesh format {fmt!r}")
    return fmt


def _parse_off(text: str, path) -> tuple[np.ndarray, np.ndarray]:
    tokens = []
    for line in text.splitlines():
        stripped = line.split("#", 1)[0].strip()
        if stripped:
            tokens.extend(stripped.split())
    if not tokens or tokens[0] != "OFF":
        raise MeshParseError(f"{path}: missing OFF header")
    try:
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4  # skip edge count
        flat = tokens[pos:]
        vertices = np.array(flat[: nv * 3], dtype=np.float64).reshape(nv, 3)
        idx = nv * 3
        faces = []
        for _ in range(nf):
            cnt = int(flat[idx])
            if cnt != 3:
                raise MeshParseError(f"{path}: only triangle faces supported, got {cnt}")
            faces.append([int(flat[idx + 1]), int(flat[idx + 2]), int(flat[idx + 3])])
            idx += cnt + 1
    except (ValueError, IndexError) as exc:
        raise MeshParseError(f"{path}: malformed OFF file: {exc}") from exc
    return vertices, np.array(faces, dtype=np.int64).reshape(nf, 3)


def _parse_obj(text: str, path) -> tuple[np.ndarray, np.ndarray]:
    vertices, faces = [], []
    try:
        for lineno, line in enumerate(text.splitlines(), 1):
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/", 1)[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise MeshParseError(
                        f"{path}:{lineno}: only triangle faces supported"
                    )
                faces.append([i - 1 for i in idx])
    except (ValueError, IndexError) as exc:
        raise MeshParseError(f"{path}: malformed OBJ file: {exc}") from exc
    return (
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
    )
