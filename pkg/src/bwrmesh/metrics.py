"""Sampled surface-to-surface distances, PSNR, and rate-distortion curves.

Distances follow the usual forward/backward sampling recipe: points are drawn
on one surface (every vertex plus uniform-in-triangle samples) and measured
against the exact nearest point of the other surface.  The scalar L2 error is
the RMS over the pooled symmetric sample set by default, with the max of the
two directional RMS values available as an alternative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriangleMesh

DEFAULT_SEED = 0x5EED
PSNR_INF = float("inf")


@dataclass
class DistanceReport:
    mean_fwd: float
    rms_fwd: float
    max_fwd: float
    mean_bwd: float
    rms_bwd: float
    max_bwd: float
    hausdorff: float
    n_samples_fwd: int
    n_samples_bwd: int
    l2_error: float
    psnr_db: float
    bpv: float | None = None

    def row(self, level: int | None = None, bpv: float | None = None) -> dict:
        return {
            "level": level,
            "bpv": self.bpv if bpv is None else bpv,
            "psnr_db": self.psnr_db,
            "l2_error": self.l2_error,
            "mean_fwd": self.mean_fwd,
            "rms_fwd": self.rms_fwd,
            "max_fwd": self.max_fwd,
            "mean_bwd": self.mean_bwd,
            "rms_bwd": self.rms_bwd,
            "max_bwd": self.max_bwd,
        }


CSV_HEADER = "level,bpv,psnr_db,l2_error,mean_fwd,rms_fwd,max_fwd,mean_bwd,rms_bwd,max_bwd"


def format_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            "%s,%s,%.6f,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g"
            % (
                "" if r["level"] is None else r["level"],
                "" if r["bpv"] is None else ("inf" if math.isinf(r["bpv"]) else "%g" % r["bpv"]),
                r["psnr_db"], r["l2_error"],
                r["mean_fwd"], r["rms_fwd"], r["max_fwd"],
                r["mean_bwd"], r["rms_bwd"], r["max_bwd"],
            )
        )
    return "\n".join(lines) + "\n"


def psnr(bbox_diag: float, l2_error: float) -> float:
    """20*log10(diagonal / L2 error), both arguments strictly positive."""
    if bbox_diag <= 0.0:
        raise ValueError(f"bounding-box diagonal must be positive, got {bbox_diag}")
    if l2_error <= 0.0:
        raise ValueError(f"L2 error must be positive, got {l2_error}")
    return 20.0 * math.log10(bbox_diag / l2_error)


# -- sampling ------------------------------------------------------------------


def sample_surface(
    mesh: TriangleMesh,
    density: float | None = None,
    seed: int = DEFAULT_SEED,
    max_samples: int = 200_000,
) -> np.ndarray:
    """Vertex positions plus uniform-in-triangle interior samples.

    Default density places 4 samples on the smallest triangle; larger
    triangles get proportionally more, capped at ``max_samples`` interior
    points in total.
    """
    if mesh.n_faces == 0:
        raise ValueError("cannot sample an empty mesh")
    v = mesh.vertices
    f = mesh.faces
    cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    positive = areas[areas > 0.0]
    if positive.size == 0:
        raise ValueError("mesh has no triangle with positive area")
    if density is None:
        density = 4.0 / positive.min()
    counts = np.ceil(density * areas).astype(np.int64)
    total = int(counts.sum())
    if total > max_samples:
        counts = np.ceil(counts * (max_samples / total)).astype(np.int64)

    rng = np.random.default_rng(seed)
    chunks = [v]
    for fi in np.flatnonzero(counts):
        n = int(counts[fi])
        r1 = np.sqrt(rng.random(n))
        r2 = rng.random(n)
        a, b, c = v[f[fi, 0]], v[f[fi, 1]], v[f[fi, 2]]
        pts = (
            (1.0 - r1)[:, None] * a
            + (r1 * (1.0 - r2))[:, None] * b
            + (r1 * r2)[:, None] * c
        )
        chunks.append(pts)
    return np.vstack(chunks)


# -- exact point-to-mesh distance -------------------------------------------------


def _point_triangle_distances(p, a, b, c):
    """Exact distances from point p to each triangle (a_i, b_i, c_i)."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    closest = np.empty_like(a)

    # vertex regions
    mask_a = (d1 <= 0) & (d2 <= 0)
    mask_b = (d3 >= 0) & (d4 <= d3)
    mask_c = (d6 >= 0) & (d5 <= d6)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    with np.errstate(divide="ignore", invalid="ignore"):
        t_ab = np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0)
        t_ac = np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0)
        t_bc_n = d4 - d3
        t_bc = np.where(
            t_bc_n + (d5 - d6) != 0, t_bc_n / (t_bc_n + (d5 - d6)), 0.0
        )
        denom = va + vb + vc
        denom = np.where(denom != 0, denom, 1.0)

    mask_ab = (~mask_a) & (~mask_b) & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    mask_ac = (~mask_a) & (~mask_c) & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    mask_bc = (
        (~mask_b) & (~mask_c) & (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    )

    closest[:] = a + (vb / denom)[:, None] * ab + (vc / denom)[:, None] * ac
    closest[mask_bc] = b[mask_bc] + t_bc[mask_bc, None] * (c - b)[mask_bc]
    closest[mask_ac] = a[mask_ac] + t_ac[mask_ac, None] * ac[mask_ac]
    closest[mask_ab] = a[mask_ab] + t_ab[mask_ab, None] * ab[mask_ab]
    closest[mask_c] = c[mask_c]
    closest[mask_b] = b[mask_b]
    closest[mask_a] = a[mask_a]
    return np.linalg.norm(closest - p, axis=1)


class MeshDistanceQuery:
    """Exact nearest-surface distances accelerated by a centroid tree.

    For every query point the exact distance to the nearest-centroid triangle
    bounds the answer from above; only triangles whose centroid lies within
    that bound plus the largest centroid-to-corner radius can beat it.
    """

    def __init__(self, mesh: TriangleMesh):
        v, f = mesh.vertices, mesh.faces
        self.a, self.b, self.c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
        self.centroids = (self.a + self.b + self.c) / 3.0
        corner_r = np.maximum(
            np.linalg.norm(self.a - self.centroids, axis=1),
            np.maximum(
                np.linalg.norm(self.b - self.centroids, axis=1),
                np.linalg.norm(self.c - self.centroids, axis=1),
            ),
        )
        self.rmax = float(corner_r.max(initial=0.0))
        self.tree = cKDTree(self.centroids)

    def distances(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        _, seed_face = self.tree.query(points)
        out = np.empty(len(points))
        for i, p in enumerate(points):
            fi = int(seed_face[i])
            upper = _point_triangle_distances(
                p, self.a[fi : fi + 1], self.b[fi : fi + 1], self.c[fi : fi + 1]
            )[0]
            if upper == 0.0:
                out[i] = 0.0
                continue
            cand = self.tree.query_ball_point(p, upper + self.rmax)
            cand = np.asarray(cand, dtype=np.int64)
            d = _point_triangle_distances(
                p, self.a[cand], self.b[cand], self.c[cand]
            )
            out[i] = d.min()
        return out


# -- aggregation -------------------------------------------------------------------


def _aggregate(dists: np.ndarray):
    n = len(dists)
    mean = math.fsum(dists) / n
    rms = math.sqrt(math.fsum(d * d for d in dists) / n)
    return mean, rms, float(dists.max())


def surface_distance(
    a: TriangleMesh,
    b: TriangleMesh,
    density: float | None = None,
    seed: int = DEFAULT_SEED,
    max_samples: int = 200_000,
    pooling: str = "symmetric",
    bbox_diag: float | None = None,
) -> DistanceReport:
    """Forward (a->b) and backward (b->a) sampled distances plus PSNR.

    ``pooling`` selects the scalar L2 error: "symmetric" pools both sample
    sets before taking the RMS, "max-directional" takes the larger of the two
    directional RMS values.
    """
    if pooling not in ("symmetric", "max-directional"):
        raise ValueError(f"unknown pooling {pooling!r}")
    pts_a = sample_surface(a, density, seed, max_samples)
    pts_b = sample_surface(b, density, seed, max_samples)
    fwd = MeshDistanceQuery(b).distances(pts_a)
    bwd = MeshDistanceQuery(a).distances(pts_b)
    # distances at the float roundoff floor are coincident surfaces, not error
    floor = 1e-12 * max(a.bbox().diagonal, b.bbox().diagonal)
    fwd[fwd < floor] = 0.0
    bwd[bwd < floor] = 0.0

    mean_f, rms_f, max_f = _aggregate(fwd)
    mean_b, rms_b, max_b = _aggregate(bwd)
    if pooling == "symmetric":
        pooled = np.concatenate([fwd, bwd])
        l2 = math.sqrt(math.fsum(d * d for d in pooled) / len(pooled))
    else:
        l2 = max(rms_f, rms_b)

    if bbox_diag is None:
        bbox_diag = b.bbox().diagonal
    value = psnr(bbox_diag, l2) if l2 > 0.0 else PSNR_INF
    return DistanceReport(
        mean_fwd=mean_f, rms_fwd=rms_f, max_fwd=max_f,
        mean_bwd=mean_b, rms_bwd=rms_b, max_bwd=max_b,
        hausdorff=max(max_f, max_b),
        n_samples_fwd=len(pts_a), n_samples_bwd=len(pts_b),
        l2_error=l2, psnr_db=value,
    )


# -- rate-distortion -------------------------------------------------------------------


def rd_curve(
    bitstream,
    reference: TriangleMesh,
    levels,
    bpv_grid,
    metro_kwargs: dict | None = None,
):
    """(rows, recommended path) over the (level, bpv) grid.

    Each row carries the full distance report columns; the recommended path
    picks, for every distinct total-bit budget seen on the grid, the
    (level, bpv) pair with the highest PSNR that fits the budget.
    """
    from .coding import payload_bit_budget, reconstruct_at_bpv

    rows = []
    costs = []
    for level in levels:
        for bpv in bpv_grid:
            mesh, achieved, report = reconstruct_at_bpv(
                bitstream, bpv, level, reference, metro_kwargs
            )
            row = report.row(level=level, bpv=bpv)
            rows.append(row)
            bits = (
                payload_bit_budget(bpv, len(mesh.vertices))
                if not math.isinf(bpv)
                else bitstream.payload_bits
            )
            costs.append(min(bits, bitstream.payload_bits))

    path = []
    for budget in sorted(set(costs)):
        best = None
        for row, bits in zip(rows, costs):
            if bits <= budget and (best is None or row["psnr_db"] > best["psnr_db"]):
                best = row
        if best is not None:
            path.append({"budget_bits": budget, **best})
    return rows, path
