"""The backward remeshing pipeline and its persistent multiresolution object.

``bwr_remesh`` iterates midpoint subdivision, recomputes a direction per new
vertex from the coarse mesh alone, and pierces the reference surface to turn
each refinement vertex into a single signed scalar.  ``synthesize`` replays
the same deterministic recipe from the base mesh and the stored scalars, so a
full-level synthesis reproduces the remesh bit for bit.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    GenusMismatchError,
    HierarchyFormatError,
    IncompatibleHierarchyError,
    PierceMissError,
    SnapError,
)
from .mesh import TriangleMesh, genus_check
from .piercing import pierce_all
from .subdivision import (
    PROV_BUTTERFLY,
    PROV_NORMAL_FALLBACK,
    PROV_RETRY_ENDPOINT_A,
    PROV_RETRY_ENDPOINT_B,
    PROV_RETRY_MIDNORMAL,
    DirectionConfig,
    SubdivisionStep,
)

_MAGIC = b"BWR1"
_VERSION = 1


@dataclass
class LevelStats:
    level: int
    new_vertices: int
    butterfly: int
    fallback: int
    retried: int
    seconds: float = 0.0


@dataclass
class MultiresHierarchy:
    base: TriangleMesh
    levels: int
    coefficients: list[np.ndarray]          # w^j, canonical parent-edge order
    provenance: list[np.ndarray]            # uint8 codes per coefficient
    config: DirectionConfig
    bbox_diag: float
    residuals: list[dict[int, np.ndarray]] = field(default_factory=list)
    stats: list[LevelStats] = field(default_factory=list)
    fold_warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.residuals:
            self.residuals = [dict() for _ in range(self.levels)]
        e0 = self.base.n_edges
        for j, w in enumerate(self.coefficients):
            expected = e0 * 4**j
            if len(w) != expected:
                raise HierarchyFormatError(
                    f"level {j} has {len(w)} coefficients, expected {expected}"
                )

    @property
    def e0(self) -> int:
        return self.base.n_edges

    def level_sizes(self) -> list[int]:
        return [self.e0 * 4**j for j in range(self.levels)]

    def vertex_count(self, level: int) -> int:
        return self.base.n_vertices + self.e0 * (4**level - 1) // 3


# -- base mesh preparation ---------------------------------------------------------


def snap_base(base: TriangleMesh, reference: TriangleMesh) -> TriangleMesh:
    """Move each base vertex onto its nearest reference vertex."""
    if not genus_check(base, reference):
        raise GenusMismatchError(
            f"base genus {base.genus()} != reference genus {reference.genus()}"
        )
    tree = cKDTree(reference.vertices)
    _, nearest = tree.query(base.vertices)
    unique, counts = np.unique(nearest, return_counts=True)
    if np.any(counts > 1):
        dup = int(unique[np.argmax(counts > 1)])
        raise SnapError(
            f"two base vertices snap to the same reference vertex {dup}"
        )
    return TriangleMesh(reference.vertices[nearest], base.faces)


def octahedron_base(reference: TriangleMesh) -> TriangleMesh:
    """Six-vertex base picked as max/min reference vertex per axis.

    Pick order: top (+z), right (+x), front (+y), left (-x), back (-y),
    bottom (-z).
    """
    v = reference.vertices
    picks = [
        int(np.argmax(v[:, 2])),
        int(np.argmax(v[:, 0])),
        int(np.argmax(v[:, 1])),
        int(np.argmin(v[:, 0])),
        int(np.argmin(v[:, 1])),
        int(np.argmin(v[:, 2])),
    ]
    if len(set(picks)) != 6:
        raise SnapError("axis extrema coincide; cannot build an octahedron base")
    # top fans over right-front-left-back, bottom fans the other way round
    faces = np.array(
        [
            [0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1],
            [5, 2, 1], [5, 3, 2], [5, 4, 3], [5, 1, 4],
        ],
        dtype=np.int64,
    )
    return TriangleMesh(v[picks], faces)


# -- level application (shared by remesh and synthesize) ----------------------------


def _directions_for(step: SubdivisionStep, provenance, config: DirectionConfig):
    """Directions per new vertex honoring stored retry provenance."""
    base_dirs, base_prov = step.direction_field(config)
    dirs = base_dirs.copy()
    parent = step.parent
    vn = parent.vertex_normals()
    edges = parent.edges
    n_m = parent.midpoint_normals()
    for code, pick in (
        (PROV_RETRY_MIDNORMAL, None),
        (PROV_RETRY_ENDPOINT_A, 0),
        (PROV_RETRY_ENDPOINT_B, 1),
    ):
        idx = np.flatnonzero(provenance == code)
        if idx.size == 0:
            continue
        if pick is None:
            dirs[idx] = n_m[idx]
        else:
            dirs[idx] = vn[edges[idx, pick]]  # vertex normals are unit already
    return dirs, base_prov


def _apply_level(step: SubdivisionStep, dirs, w, residuals) -> TriangleMesh:
    """Build the child mesh: old vertices kept, midpoint + w*s per new vertex."""
    nv = step.parent.n_vertices
    verts = step.child.vertices.copy()
    verts[nv:] = step.midpoints + w[:, None] * dirs
    for idx, d in residuals.items():
        verts[nv + idx] = verts[nv + idx] + d
    return TriangleMesh(verts, step.child.faces, validate=False)


# -- remesh --------------------------------------------------------------------------


def bwr_remesh(
    base: TriangleMesh,
    reference: TriangleMesh,
    levels: int,
    config: DirectionConfig | None = None,
    mode: str = "accelerated",
    threads: int = 1,
    check_folds: bool = True,
) -> MultiresHierarchy:
    import time

    config = config or DirectionConfig()
    if levels < 0:
        raise ValueError("levels must be >= 0")
    if not genus_check(base, reference):
        raise GenusMismatchError(
            f"base genus {base.genus()} != reference genus {reference.genus()}"
        )
    coefficients, provenance, stats = [], [], []
    fold_warnings: list[str] = []
    current = base
    for j in range(levels):
        t0 = time.perf_counter()
        step = SubdivisionStep(current)
        dirs, prov = step.direction_field(config)
        n_m = step.parent.midpoint_normals()
        results, misses = pierce_all(
            step.midpoints, dirs, reference, n_m, mode=mode,
            config=config, threads=threads,
        )
        retried = 0
        if misses:
            retried = _retry_misses(
                step, dirs, prov, results, misses, reference, n_m, config, j
            )
        w = np.array([r.w for r in results], dtype=np.float64)
        current = _apply_level(step, dirs, w, {})
        if check_folds:
            fold_warnings.extend(_fold_report(current, j + 1, config))
        coefficients.append(w)
        provenance.append(prov)
        stats.append(
            LevelStats(
                level=j,
                new_vertices=len(w),
                butterfly=int(np.sum(prov == PROV_BUTTERFLY)),
                fallback=int(np.sum(prov == PROV_NORMAL_FALLBACK)),
                retried=retried,
                seconds=time.perf_counter() - t0,
            )
        )
    return MultiresHierarchy(
        base=base,
        levels=levels,
        coefficients=coefficients,
        provenance=provenance,
        config=config,
        bbox_diag=reference.bbox().diagonal,
        stats=stats,
        fold_warnings=fold_warnings,
    )


def _retry_misses(step, dirs, prov, results, misses, reference, n_m, config, level):
    """Retry ladder: midpoint normal, endpoint-a normal, endpoint-b normal."""
    parent = step.parent
    vn = parent.vertex_normals()
    edges = parent.edges
    retried = 0
    for i in misses:
        attempts = (
            (PROV_RETRY_MIDNORMAL, n_m[i]),
            (PROV_RETRY_ENDPOINT_A, vn[edges[i, 0]]),
            (PROV_RETRY_ENDPOINT_B, vn[edges[i, 1]]),
        )
        fixed = False
        for code, d in attempts:
            if np.array_equal(d, dirs[i]):
                continue
            sub, sub_misses = pierce_all(
                step.midpoints[i : i + 1], d[None, :], reference,
                n_m[i : i + 1], mode="full-search", config=config,
            )
            if not sub_misses:
                results[i] = sub[0]
                dirs[i] = d
                prov[i] = code
                retried += 1
                fixed = True
                break
        if not fixed:
            raise PierceMissError(
                f"pierce failed for new vertex {parent.n_vertices + i} "
                f"at level {level} after all retries",
                vertex=parent.n_vertices + i,
                level=level,
            )
    return retried


def _fold_report(mesh: TriangleMesh, level: int, config: DirectionConfig):
    """Positive-area and dihedral-floor checks; returns warning strings."""
    warnings = []
    fn_raw = mesh.face_normals(normalized=False)
    areas = 0.5 * np.linalg.norm(fn_raw, axis=1)
    zero = np.flatnonzero(areas <= 0.0)
    for f in zero[:5]:
        warnings.append(f"level {level}: face {int(f)} has non-positive area")
    fn = mesh.face_normals()
    ef = mesh.edge_faces
    closed = ef[:, 1] >= 0
    cosang = np.einsum("ij,ij->i", fn[ef[closed, 0]], fn[ef[closed, 1]])
    # dihedral below the floor means the faces fold back onto each other
    fold_cos = np.cos(np.deg2rad(180.0 - config.fold_floor_deg))
    folded = np.flatnonzero(cosang < fold_cos)
    for e in folded[:5]:
        warnings.append(f"level {level}: fold across edge {int(e)}")
    if len(zero) > 5 or len(folded) > 5:
        warnings.append(
            f"level {level}: {len(zero)} zero-area faces, {len(folded)} folds total"
        )
    return warnings


# -- synthesis -------------------------------------------------------------------------


def synthesize(
    hierarchy: MultiresHierarchy,
    level: int | None = None,
    coefficient_override: list[np.ndarray] | None = None,
) -> TriangleMesh:
    """Deterministic reconstruction from base + scalars up to ``level``."""
    level = hierarchy.levels if level is None else level
    if level < 0 or level > hierarchy.levels:
        raise ValueError(f"level {level} outside [0, {hierarchy.levels}]")
    coeffs = hierarchy.coefficients
    if coefficient_override is not None:
        if len(coefficient_override) < level:
            raise IncompatibleHierarchyError(
                f"override supplies {len(coefficient_override)} levels, need {level}"
            )
        for j in range(level):
            if len(coefficient_override[j]) != len(coeffs[j]):
                raise IncompatibleHierarchyError(
                    f"override level {j} has {len(coefficient_override[j])} "
                    f"coefficients, expected {len(coeffs[j])}"
                )
        coeffs = coefficient_override
    current = hierarchy.base
    for j in range(level):
        step = SubdivisionStep(current)
        dirs, _ = _directions_for(step, hierarchy.provenance[j], hierarchy.config)
        w = np.asarray(coeffs[j], dtype=np.float64)
        current = _apply_level(step, dirs, w, hierarchy.residuals[j])
    return current


def morph(
    hierarchies: list[MultiresHierarchy],
    weights,
    level: int,
) -> TriangleMesh:
    """Blend topology-identical remeshes by per-vertex weighted averaging."""
    weights = np.asarray(weights, dtype=np.float64)
    if len(weights) != len(hierarchies):
        raise ValueError("one weight per hierarchy required")
    if abs(float(weights.sum()) - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {weights.sum()}, expected 1")
    if np.any(weights < 0.0) or np.any(weights > 1.0):
        raise ValueError("weights must lie in [0, 1]")
    first = hierarchies[0]
    for h in hierarchies[1:]:
        if not np.array_equal(h.base.faces, first.base.faces):
            raise IncompatibleHierarchyError("hierarchies differ in base connectivity")
    meshes = [synthesize(h, level) for h in hierarchies]
    blended = np.zeros_like(meshes[0].vertices)
    for a, m in zip(weights, meshes):
        blended += a * m.vertices
    return TriangleMesh(blended, meshes[0].faces, validate=False)


# -- persistence -------------------------------------------------------------------------


def save_hierarchy(hierarchy: MultiresHierarchy, path) -> None:
    body = bytearray()
    body += struct.pack("<HIIII", _VERSION, hierarchy.levels,
                        hierarchy.base.n_edges, hierarchy.base.n_vertices,
                        hierarchy.base.n_faces)
    body += struct.pack("<6d", *hierarchy.config.as_tuple())
    body += struct.pack("<d", hierarchy.bbox_diag)
    body += hierarchy.base.vertices.astype("<f8").tobytes()
    body += hierarchy.base.faces.astype("<u4").tobytes()
    for j in range(hierarchy.levels):
        body += hierarchy.coefficients[j].astype("<f8").tobytes()
        body += hierarchy.provenance[j].astype("u1").tobytes()
        sparse = sorted(hierarchy.residuals[j].items())
        body += struct.pack("<I", len(sparse))
        for idx, vec in sparse:
            body += struct.pack("<I3d", idx, *np.asarray(vec, dtype=np.float64))
    blob = _MAGIC + bytes(body)
    blob += struct.pack("<I", zlib.crc32(bytes(body)))
    with open(path, "wb") as fh:
        fh.write(blob)


def load_hierarchy(path) -> MultiresHierarchy:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != _MAGIC:
        raise HierarchyFormatError(f"{path}: not a hierarchy file")
    body, (crc,) = blob[4:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise HierarchyFormatError(f"{path}: checksum mismatch (corrupt file)")
    try:
        off = 0
        version, levels, e0, v0, f0 = struct.unpack_from("<HIIII", body, off)
        off += struct.calcsize("<HIIII")
        if version != _VERSION:
            raise HierarchyFormatError(f"{path}: unsupported version {version}")
        config = DirectionConfig.from_tuple(struct.unpack_from("<6d", body, off))
        off += 48
        (bbox_diag,) = struct.unpack_from("<d", body, off)
        off += 8
        verts = np.frombuffer(body, "<f8", v0 * 3, off).reshape(v0, 3).copy()
        off += v0 * 24
        faces = np.frombuffer(body, "<u4", f0 * 3, off).reshape(f0, 3)
        faces = faces.astype(np.int64)
        off += f0 * 12
        base = TriangleMesh(verts, faces)
        if base.n_edges != e0:
            raise HierarchyFormatError(f"{path}: edge count mismatch")
        coefficients, provenance, residuals = [], [], []
        for j in range(levels):
            n = e0 * 4**j
            w = np.frombuffer(body, "<f8", n, off).copy()
            off += 8 * n
            prov = np.frombuffer(body, "u1", n, off).copy()
            off += n
            (count,) = struct.unpack_from("<I", body, off)
            off += 4
            sparse = {}
            for _ in range(count):
                idx, x, y, z = struct.unpack_from("<I3d", body, off)
                off += struct.calcsize("<I3d")
                sparse[int(idx)] = np.array([x, y, z])
            coefficients.append(w)
            provenance.append(prov)
            residuals.append(sparse)
        if off != len(body):
            raise HierarchyFormatError(f"{path}: trailing bytes")
    except (struct.error, ValueError) as exc:
        raise HierarchyFormatError(f"{path}: truncated or corrupt: {exc}") from exc
    return MultiresHierarchy(
        base=base,
        levels=levels,
        coefficients=coefficients,
        provenance=provenance,
        config=config,
        bbox_diag=bbox_diag,
        residuals=residuals,
    )
