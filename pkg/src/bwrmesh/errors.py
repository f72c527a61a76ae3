"""Exception hierarchy shared across the package."""


class BwrError(Exception):
    """Base class for all package errors."""


class MeshParseError(BwrError):
    """A mesh file could not be parsed under the requested format."""


class MeshValidationError(BwrError):
    """A mesh violates a structural invariant (index range, manifoldness, ...)."""


class OpenMeshError(MeshValidationError):
    """An operation that requires a closed mesh received one with boundary."""


class NonOrientableMeshError(MeshValidationError):
    """A closed-surface operation received a non-orientable mesh."""


class GenusMismatchError(BwrError):
    """Base and reference meshes do not share the same genus."""


class SnapError(BwrError):
    """Base-vertex snapping failed (duplicate nearest reference vertices)."""


class PierceMissError(BwrError):
    """A refinement vertex found no intersection with the reference surface."""

    def __init__(self, message, vertex=None, level=None):
        super().__init__(message)
        self.vertex = vertex
        self.level = level


class HierarchyFormatError(BwrError):
    """A hierarchy or bitstream file is corrupt or has the wrong version."""


class IncompatibleHierarchyError(BwrError):
    """Two hierarchies do not share base connectivity."""


class CodecError(BwrError):
    """Invalid coding parameters or an undecodable budget."""
