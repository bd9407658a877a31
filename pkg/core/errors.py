"""Exception hierarchy shared by the library, the commands and the CLI."""

from typing import Optional


class SoftRasError(Exception):
    """Base class for every error raised by the rasterizer and fitting pipeline"""

    error_code = "SOFTRAS_ERROR"
    # 1: numerical or validation failure, 2: I/O or argument error
    exit_code = 1


class MeshValidationError(SoftRasError):
    error_code = "MESH_INVALID"


class SubdivisionLimitError(MeshValidationError):
    error_code = "SUBDIVISION_LIMIT"


class NonManifoldEdgeError(MeshValidationError):
    error_code = "NON_MANIFOLD_EDGE"


class ObjFormatError(SoftRasError):
    """Malformed Wavefront OBJ input"""

    error_code = "OBJ_FORMAT"
    exit_code = 2

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ProjectionError(SoftRasError):
    """A vertex lies on or behind the near plane"""

    error_code = "VERTEX_BEHIND_CAMERA"

    def __init__(self, message: str, vertex_index: int):
        self.vertex_index = vertex_index
        super().__init__(message)


class RasterInputError(SoftRasError):
    error_code = "RASTER_INPUT"


class MissingColorsError(RasterInputError):
    error_code = "MISSING_COLORS"


class LossError(SoftRasError):
    error_code = "LOSS_ERROR"


class FitError(SoftRasError):
    """Failure inside the fitting loop, located by iteration and view"""

    error_code = "FIT_ERROR"

    def __init__(self, message: str, iteration: Optional[int] = None, view_index: Optional[int] = None):
        self.iteration = iteration
        self.view_index = view_index
        location = []
        if iteration is not None:
            location.append(f"iteration {iteration}")
        if view_index is not None:
            location.append(f"view {view_index}")
        if location:
            message = f"{', '.join(location)}: {message}"
        super().__init__(message)


class NonFiniteGradientError(FitError):
    error_code = "NON_FINITE_GRADIENT"


class OpenMeshError(SoftRasError):
    error_code = "OPEN_MESH"


class GridMismatchError(SoftRasError):
    error_code = "GRID_MISMATCH"


class ImageFormatError(SoftRasError):
    error_code = "IMAGE_FORMAT"
    exit_code = 2


class ManifestError(SoftRasError):
    """Malformed view manifest"""

    error_code = "MANIFEST_ERROR"
    exit_code = 2

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
