"""Exception types shared across the package."""


class CurvforgeError(Exception):
    """Base class for all curvforge errors."""


class MeshError(CurvforgeError):
    """Invalid mesh: parse failure, non-manifold edge, wrong topology."""


class TriangleInequalityError(MeshError):
    """An intrinsic metric violates the strict triangle inequality."""


class FieldError(CurvforgeError):
    """Invalid scalar field data or expression."""


class SolverError(CurvforgeError):
    """A linear solve failed or was called on a singular system."""


class CompatibilityError(SolverError):
    """Pure-Neumann data violates the compatibility integral."""


class BracketError(CurvforgeError):
    """A sub/super-solution pair could not be built or verified."""


class IterationError(CurvforgeError):
    """The monotone iteration failed (order broken or not converged)."""


class ModelError(CurvforgeError):
    """Model-form declaration inconsistent with the mesh topology."""
