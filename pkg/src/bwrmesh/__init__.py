"""Backward wavelet remeshing for triangle meshes.

Converts an arbitrary-connectivity triangle mesh into a semi-regular
multiresolution representation: a small base mesh plus one scalar per
refinement vertex, displaced along a direction the decoder recomputes from
the coarse mesh alone.  The representation supports exact resynthesis,
cross-model coefficient mixing, morphing, progressive bitplane coding, and
sampled surface-distance / PSNR measurement.
"""

from .coding import (
    Bitstream,
    CoefficientImage,
    CoefficientLayout,
    decode,
    default_delta,
    dequantize,
    encode_hierarchy,
    load_bitstream,
    map_to_image,
    payload_bit_budget,
    quantize,
    reconstruct_at_bpv,
    save_bitstream,
)
from .errors import (
    BwrError,
    CodecError,
    GenusMismatchError,
    HierarchyFormatError,
    IncompatibleHierarchyError,
    MeshParseError,
    MeshValidationError,
    NonOrientableMeshError,
    OpenMeshError,
    PierceMissError,
    SnapError,
)
from .hierarchy import (
    LevelStats,
    MultiresHierarchy,
    bwr_remesh,
    load_hierarchy,
    morph,
    octahedron_base,
    save_hierarchy,
    snap_base,
    synthesize,
)
from .mesh import BBox, TriangleMesh, genus_check, load_mesh, save_mesh
from .metrics import (
    CSV_HEADER,
    DistanceReport,
    format_csv,
    psnr,
    rd_curve,
    sample_surface,
    surface_distance,
)
from .piercing import Bvh, PierceResult, barycentric, pierce, pierce_all, ray_plane_intersect
from .shapes import icosahedron, icosphere, octahedron, torus, uv_sphere
from .subdivision import (
    DirectionConfig,
    SubdivisionStep,
    midpoint_subdivide,
    subdivided_counts,
)

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "Bitstream",
    "Bvh",
    "BwrError",
    "CSV_HEADER",
    "CodecError",
    "CoefficientImage",
    "CoefficientLayout",
    "DirectionConfig",
    "DistanceReport",
    "GenusMismatchError",
    "HierarchyFormatError",
    "IncompatibleHierarchyError",
    "LevelStats",
    "MeshParseError",
    "MeshValidationError",
    "MultiresHierarchy",
    "NonOrientableMeshError",
    "OpenMeshError",
    "PierceMissError",
    "PierceResult",
    "SnapError",
    "SubdivisionStep",
    "TriangleMesh",
    "barycentric",
    "bwr_remesh",
    "decode",
    "default_delta",
    "dequantize",
    "encode_hierarchy",
    "format_csv",
    "genus_check",
    "icosahedron",
    "icosphere",
    "load_bitstream",
    "load_hierarchy",
    "load_mesh",
    "map_to_image",
    "midpoint_subdivide",
    "morph",
    "octahedron",
    "octahedron_base",
    "payload_bit_budget",
    "pierce",
    "pierce_all",
    "psnr",
    "quantize",
    "ray_plane_intersect",
    "rd_curve",
    "reconstruct_at_bpv",
    "sample_surface",
    "save_bitstream",
    "save_hierarchy",
    "save_mesh",
    "snap_base",
    "subdivided_counts",
    "surface_distance",
    "synthesize",
    "torus",
    "uv_sphere",
]
