"""Progressive coding of the per-level scalars.

The scalars of every level are quantized and laid out as a 2D image whose
quadtree mirrors the 4-ary edge tree: level-0 edges become tree roots packed
into a coarsest top-left block, three per 2x2 group; the fourth pixel of each
group carries the mean of its right, lower, and diagonal neighbors and has no
descendants.  Descendant blocks follow the standard spatial-orientation-tree
arrangement, so the image can be driven by a set-partitioning bitplane coder.
The coder emits raw significance/sign/refinement bits most-significant plane
first; any prefix of the payload decodes to a coarser-precision image and the
full payload is lossless on the quantized values.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CodecError, HierarchyFormatError
from .hierarchy import MultiresHierarchy, synthesize
from .mesh import TriangleMesh
from .subdivision import DirectionConfig, SubdivisionStep

_MAGIC = b"BWRC"
_VERSION = 1


def default_delta(bbox_diag: float) -> float:
    """Quantization step keeping quantizer PSNR well above remesh PSNRs."""
    return bbox_diag * 2.0**-16


def quantize(values, delta: float) -> np.ndarray:
    if delta <= 0.0:
        raise CodecError(f"quantization step must be positive, got {delta}")
    return np.rint(np.asarray(values, dtype=np.float64) / delta).astype(np.int64)


def dequantize(ints, delta: float) -> np.ndarray:
    if delta <= 0.0:
        raise CodecError(f"quantization step must be positive, got {delta}")
    return np.asarray(ints, dtype=np.float64) * delta


# -- layout ---------------------------------------------------------------------------


class CoefficientLayout:
    """Pixel position of every (level, edge) coefficient, plus tree structure.

    Recomputable from the base face list and the level count alone, so the
    decoder rebuilds it with no side information.
    """

    def __init__(self, base: TriangleMesh, levels: int):
        if levels < 1:
            raise CodecError("coefficient image needs at least one level")
        self.levels = levels
        self.e0 = base.n_edges
        groups = -(-self.e0 // 3)
        gr = int(math.isqrt(groups - 1)) + 1 if groups > 1 else 1
        gc = -(-groups // gr)
        self.llh, self.llw = 2 * gr, 2 * gc
        self.height = self.llh << (levels - 1)
        self.width = self.llw << (levels - 1)

        positions = [np.empty((self.e0, 2), dtype=np.int64)]
        for e in range(self.e0):
            g, t = divmod(e, 3)
            k, l = divmod(g, gc)
            dr, dc = ((0, 1), (1, 0), (1, 1))[t]
            positions[0][e] = (2 * k + dr, 2 * l + dc)

        mesh = base
        for j in range(1, levels):
            step = SubdivisionStep(mesh)
            prev = positions[j - 1]
            cur = np.empty((self.e0 * 4**j, 2), dtype=np.int64)
            for e in range(len(prev)):
                bi, bj = self.child_block(int(prev[e, 0]), int(prev[e, 1]))
                for slot, child in enumerate(step.child_edges_of[e]):
                    cur[child] = (bi + slot // 2, bj + slot % 2)
            positions.append(cur)
            mesh = step.child
        self.positions = positions

        self.role = np.zeros((self.height, self.width), dtype=bool)  # True = coefficient
        for pos in positions:
            self.role[pos[:, 0], pos[:, 1]] = True

    def child_block(self, i: int, j: int):
        """Top-left pixel of the 2x2 child block, or None for leaves."""
        if i < self.llh and j < self.llw:
            if i % 2 == 0 and j % 2 == 0:
                return None
            k, l = i // 2, j // 2
            if i % 2 == 0:
                bi, bj = 2 * k, self.llw + 2 * l
            elif j % 2 == 0:
                bi, bj = self.llh + 2 * k, 2 * l
            else:
                bi, bj = self.llh + 2 * k, self.llw + 2 * l
        else:
            bi, bj = 2 * i, 2 * j
        if bi >= self.height or bj >= self.width:
            return None
        return bi, bj


@dataclass
class CoefficientImage:
    values: np.ndarray            # quantized integers, (H, W)
    layout: CoefficientLayout
    delta: float

    def unmap(self) -> list[np.ndarray]:
        """Recover per-level dequantized scalar arrays; fillers discarded."""
        out = []
        for pos in self.layout.positions:
            q = self.values[pos[:, 0], pos[:, 1]]
            out.append(dequantize(q, self.delta))
        return out


def map_to_image(
    hierarchy: MultiresHierarchy, delta: float | None = None
) -> CoefficientImage:
    if delta is None:
        delta = default_delta(hierarchy.bbox_diag)
    layout = CoefficientLayout(hierarchy.base, hierarchy.levels)
    values = np.zeros((layout.height, layout.width), dtype=np.int64)
    for pos, w in zip(layout.positions, hierarchy.coefficients):
        values[pos[:, 0], pos[:, 1]] = quantize(w, delta)
    _fill_fillers(values, layout)
    return CoefficientImage(values=values, layout=layout, delta=delta)


def _fill_fillers(values, layout):
    """Each filler takes the rounded mean of the coefficients in its 2x2 group."""
    role = layout.role
    H, W = values.shape
    for i in range(0, H, 2):
        for j in range(0, W, 2):
            block_role = role[i : i + 2, j : j + 2]
            if block_role.all():
                continue
            block = values[i : i + 2, j : j + 2]
            present = block[block_role]
            fill = int(np.rint(present.mean())) if present.size else 0
            block[~block_role] = fill


# -- bit plumbing ----------------------------------------------------------------------


class _OutOfBits(Exception):
    pass


class _BitWriter:
    def __init__(self):
        self._bits = []

    def write(self, bit: int):
        self._bits.append(1 if bit else 0)

    @property
    def count(self) -> int:
        return len(self._bits)

    def to_bytes(self) -> bytes:
        out = bytearray((len(self._bits) + 7) // 8)
        for k, b in enumerate(self._bits):
            if b:
                out[k >> 3] |= 0x80 >> (k & 7)  # MSB-first packing
        return bytes(out)


class _BitReader:
    def __init__(self, data: bytes, total_bits: int, budget: int | None = None):
        self._data = data
        self._total = total_bits if budget is None else min(total_bits, budget)
        self._pos = 0

    def read(self) -> int:
        if self._pos >= self._total:
            raise _OutOfBits
        byte = self._data[self._pos >> 3]
        bit = (byte >> (7 - (self._pos & 7))) & 1
        self._pos += 1
        return bit

    @property
    def consumed(self) -> int:
        return self._pos


# -- set-partitioning zerotree codec ----------------------------------------------------


class _Tree:
    """Descendant maxima and child lists for the spatial orientation tree."""

    def __init__(self, layout: CoefficientLayout, mag: np.ndarray | None):
        self.layout = layout
        H, W = layout.height, layout.width
        self.children = {}
        for i in range(H):
            for j in range(W):
                blk = layout.child_block(i, j)
                if blk is not None:
                    bi, bj = blk
                    self.children[(i, j)] = [
                        (bi, bj), (bi, bj + 1), (bi + 1, bj), (bi + 1, bj + 1)
                    ]
        self.desc_max = None
        self.grand_max = None
        if mag is not None:
            self._compute_maxima(mag)

    def _compute_maxima(self, mag):
        desc = {}
        stack = [(p, False) for p in self.children]
        seen = set()
        order = []
        # post-order over all internal nodes
        while stack:
            p, expanded = stack.pop()
            if expanded:
                order.append(p)
                continue
            if p in seen:
                continue
            seen.add(p)
            stack.append((p, True))
            for c in self.children[p]:
                if c in self.children:
                    stack.append((c, False))
        for p in order:
            if p in desc:
                continue
            m = 0
            for c in self.children[p]:
                m = max(m, int(mag[c]), desc.get(c, 0))
            desc[p] = m
        self.desc_max = desc
        self.grand_max = {
            p: max(desc.get(c, 0) for c in cs) for p, cs in self.children.items()
        }

    def ll_pixels(self):
        for i in range(self.layout.llh):
            for j in range(self.layout.llw):
                yield (i, j)


def encode_image(image: CoefficientImage) -> tuple[bytes, int, int]:
    """Returns (payload bytes, payload bit count, bitplane count)."""
    q = image.values
    mag = np.abs(q)
    sign = q < 0
    vmax = int(mag.max(initial=0))
    nmax = vmax.bit_length() - 1 if vmax > 0 else 0
    tree = _Tree(image.layout, mag)
    writer = _BitWriter()

    lip = list(tree.ll_pixels())
    lis = [(p, "A") for p in tree.ll_pixels() if p in tree.children]
    lsp: list[tuple[tuple[int, int], int]] = []

    for n in range(nmax, -1, -1):
        thr = 1 << n
        survivors = []
        for p in lip:
            sig = int(mag[p]) >= thr
            writer.write(sig)
            if sig:
                writer.write(bool(sign[p]))
                lsp.append((p, n))
            else:
                survivors.append(p)
        lip = survivors

        i = 0
        while i < len(lis):
            p, typ = lis[i]
            if typ == "A":
                sig = tree.desc_max[p] >= thr
                writer.write(sig)
                if sig:
                    for c in tree.children[p]:
                        csig = int(mag[c]) >= thr
                        writer.write(csig)
                        if csig:
                            writer.write(bool(sign[c]))
                            lsp.append((c, n))
                        else:
                            lip.append(c)
                    if any(c in tree.children for c in tree.children[p]):
                        lis.append((p, "B"))
                    lis[i] = None
            else:
                sig = tree.grand_max[p] >= thr
                writer.write(sig)
                if sig:
                    for c in tree.children[p]:
                        lis.append((c, "A"))
                    lis[i] = None
            i += 1
        lis = [e for e in lis if e is not None]

        for p, added in lsp:
            if added > n:
                writer.write((int(mag[p]) >> n) & 1)

    return writer.to_bytes(), writer.count, nmax + 1


def decode_image(
    payload: bytes,
    payload_bits: int,
    nplanes: int,
    layout: CoefficientLayout,
    delta: float,
    budget_bits: int | None = None,
) -> tuple[CoefficientImage, int]:
    """Mirror of the encoder; returns (image, payload bits consumed).

    A truncated budget stops mid-pass; coefficients that became significant
    but lack low planes are reconstructed at the middle of their uncertainty
    interval, everything still insignificant decodes to zero.
    """
    if budget_bits is not None and budget_bits < 0:
        raise CodecError("bit budget below zero: nothing decodable")
    reader = _BitReader(payload, payload_bits, budget_bits)
    tree = _Tree(layout, None)
    H, W = layout.height, layout.width
    mag = np.zeros((H, W), dtype=np.int64)
    neg = np.zeros((H, W), dtype=bool)
    known = np.full((H, W), -1, dtype=np.int64)  # lowest decoded plane, -1 = insig

    # grand/desc significance at the decoder is driven entirely by read bits
    lip = list(tree.ll_pixels())
    lis = [(p, "A") for p in tree.ll_pixels() if p in tree.children]
    lsp: list[tuple[tuple[int, int], int]] = []

    try:
        nmax = nplanes - 1
        for n in range(nmax, -1, -1):
            survivors = []
            for p in lip:
                if reader.read():
                    neg[p] = bool(reader.read())
                    mag[p] = 1 << n
                    known[p] = n
                    lsp.append((p, n))
                else:
                    survivors.append(p)
            lip = survivors

            i = 0
            while i < len(lis):
                p, typ = lis[i]
                if typ == "A":
                    if reader.read():
                        for c in tree.children[p]:
                            if reader.read():
                                neg[c] = bool(reader.read())
                                mag[c] = 1 << n
                                known[c] = n
                                lsp.append((c, n))
                            else:
                                lip.append(c)
                        if any(c in tree.children for c in tree.children[p]):
                            lis.append((p, "B"))
                        lis[i] = None
                else:
                    if reader.read():
                        for c in tree.children[p]:
                            lis.append((c, "A"))
                        lis[i] = None
                i += 1
            lis = [e for e in lis if e is not None]

            for p, added in lsp:
                if added > n:
                    if reader.read():
                        mag[p] += 1 << n
                    known[p] = n
    except _OutOfBits:
        pass

    est = mag.astype(np.int64)
    partial = known > 0
    est[partial] += (1 << known[partial]) >> 1
    values = np.where(neg, -est, est)
    return CoefficientImage(values=values, layout=layout, delta=delta), reader.consumed


# -- bitstream container ------------------------------------------------------------------


@dataclass
class Bitstream:
    height: int
    width: int
    delta: float
    levels: int
    e0: int
    nplanes: int
    base_bytes: bytes
    payload: bytes
    payload_bits: int
    # sparse (level, edge, code) retry overrides for direction replay
    retries: tuple = ()

    def header_bytes(self) -> int:
        return (
            struct.calcsize("<IIdIIBIIQ")
            + len(_MAGIC)
            + len(self.base_bytes)
            + 13 * len(self.retries)
            + 4
        )

    def total_bits(self) -> int:
        return 8 * self.header_bytes() + self.payload_bits


def pack_base_mesh(
    mesh: TriangleMesh, config: DirectionConfig, bbox_diag: float
) -> bytes:
    """Base mesh block: 32-bit coordinates, delta-coded connectivity, config."""
    out = bytearray()
    out += struct.pack("<II", mesh.n_vertices, mesh.n_faces)
    out += struct.pack("<6d", *config.as_tuple())
    out += struct.pack("<d", bbox_diag)
    out += mesh.vertices.astype("<f4").tobytes()
    flat = mesh.faces.reshape(-1).astype(np.int64)
    deltas = np.diff(flat, prepend=0).astype("<i4")
    out += deltas.tobytes()
    return bytes(out)


def unpack_base_mesh(data: bytes):
    try:
        off = 0
        v0, f0 = struct.unpack_from("<II", data, off)
        off += 8
        config = DirectionConfig.from_tuple(struct.unpack_from("<6d", data, off))
        off += 48
        (bbox_diag,) = struct.unpack_from("<d", data, off)
        off += 8
        verts = np.frombuffer(data, "<f4", v0 * 3, off).astype(np.float64)
        off += v0 * 12
        deltas = np.frombuffer(data, "<i4", f0 * 3, off).astype(np.int64)
        faces = np.cumsum(deltas).reshape(f0, 3)
    except (struct.error, ValueError) as exc:
        raise HierarchyFormatError(f"corrupt base mesh block: {exc}") from exc
    return TriangleMesh(verts.reshape(v0, 3), faces), config, bbox_diag


def encode(image: CoefficientImage, base_bytes: bytes, retries=()) -> Bitstream:
    payload, bits, nplanes = encode_image(image)
    return Bitstream(
        height=image.layout.height,
        width=image.layout.width,
        delta=image.delta,
        levels=image.layout.levels,
        e0=image.layout.e0,
        nplanes=nplanes,
        base_bytes=base_bytes,
        payload=payload,
        payload_bits=bits,
        retries=tuple(retries),
    )


def encode_hierarchy(
    hierarchy: MultiresHierarchy, delta: float | None = None
) -> Bitstream:
    image = map_to_image(hierarchy, delta)
    base_bytes = pack_base_mesh(
        hierarchy.base, hierarchy.config, hierarchy.bbox_diag
    )
    # retry overrides change the replayed direction, so they travel with the
    # stream; butterfly/normal-fallback codes are re-derivable and stay out
    retries = []
    for j, prov in enumerate(hierarchy.provenance):
        for e in np.flatnonzero(prov >= 2):
            retries.append((j, int(e), int(prov[e])))
    return encode(image, base_bytes, retries)


def decode(bitstream: Bitstream, budget_bits: int | None = None):
    """Returns (CoefficientImage, base mesh, DirectionConfig, bbox_diag, used bits)."""
    base, config, bbox_diag = unpack_base_mesh(bitstream.base_bytes)
    layout = CoefficientLayout(base, bitstream.levels)
    if layout.height != bitstream.height or layout.width != bitstream.width:
        raise HierarchyFormatError("bitstream header disagrees with layout")
    image, used = decode_image(
        bitstream.payload,
        bitstream.payload_bits,
        bitstream.nplanes,
        layout,
        bitstream.delta,
        budget_bits,
    )
    return image, base, config, bbox_diag, used


def save_bitstream(stream: Bitstream, path) -> None:
    body = struct.pack(
        "<IIdIIBIIQ",
        stream.height,
        stream.width,
        stream.delta,
        stream.levels,
        stream.e0,
        stream.nplanes,
        len(stream.base_bytes),
        len(stream.retries),
        stream.payload_bits,
    )
    body += stream.base_bytes
    for j, e, code in stream.retries:
        body += struct.pack("<IQB", j, e, code)
    body += stream.payload
    with open(path, "wb") as fh:
        fh.write(_MAGIC + body + struct.pack("<I", zlib.crc32(body)))


def load_bitstream(path) -> Bitstream:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != _MAGIC:
        raise HierarchyFormatError(f"{path}: not a bitstream file")
    body, (crc,) = blob[4:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise HierarchyFormatError(f"{path}: checksum mismatch (corrupt file)")
    try:
        head = struct.calcsize("<IIdIIBIIQ")
        (h, w, delta, levels, e0, nplanes, base_len, n_retries,
         payload_bits) = struct.unpack_from("<IIdIIBIIQ", body, 0)
        off = head
        base_bytes = body[off : off + base_len]
        off += base_len
        retries = []
        for _ in range(n_retries):
            j, e, code = struct.unpack_from("<IQB", body, off)
            off += 13
            retries.append((j, e, code))
        payload = body[off:]
        if len(payload) < (payload_bits + 7) // 8:
            raise HierarchyFormatError(f"{path}: truncated payload")
    except struct.error as exc:
        raise HierarchyFormatError(f"{path}: truncated header: {exc}") from exc
    return Bitstream(
        height=h, width=w, delta=delta, levels=levels, e0=e0,
        nplanes=nplanes, base_bytes=base_bytes, payload=payload,
        payload_bits=payload_bits, retries=tuple(retries),
    )


# -- bpv-budgeted reconstruction --------------------------------------------------------


def payload_bit_budget(bpv: float, vertex_count: int) -> int:
    """Payload bits available at a given rate: floor(bpv * vertices)."""
    return int(math.floor(bpv * vertex_count))


def reconstruct_at_bpv(
    bitstream: Bitstream,
    bpv: float,
    level: int,
    reference: TriangleMesh | None = None,
    metro_kwargs: dict | None = None,
):
    """Decode at a bpv budget and synthesize the level-j mesh.

    Returns (mesh, achieved_bpv, report) where report is a DistanceReport
    against the reference (None when no reference is given).
    """
    if level < 0 or level > bitstream.levels:
        raise CodecError(f"level {level} outside [0, {bitstream.levels}]")
    base, config, bbox_diag = unpack_base_mesh(bitstream.base_bytes)
    v_level = base.n_vertices + base.n_edges * (4**level - 1) // 3
    budget = None if math.isinf(bpv) else payload_bit_budget(bpv, v_level)
    image, _, _, _, used = decode(bitstream, budget)
    coeffs = image.unmap()
    provenance = [np.zeros(len(c), dtype=np.uint8) for c in coeffs]
    for j, e, code in bitstream.retries:
        provenance[j][e] = code
    hier = MultiresHierarchy(
        base=base,
        levels=bitstream.levels,
        coefficients=coeffs,
        provenance=provenance,
        config=config,
        bbox_diag=bbox_diag,
    )
    mesh = synthesize(hier, level)
    achieved = used / v_level
    report = None
    if reference is not None:
        from .metrics import surface_distance

        report = surface_distance(mesh, reference, **(metro_kwargs or {}))
    return mesh, achieved, report
