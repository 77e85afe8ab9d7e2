"""Exception types shared across the package."""


class GlvortexError(Exception):
    """Base class for all package errors."""


class OutOfTubeError(GlvortexError):
    """Point lies outside the tubular neighbourhood of the boundary."""


class BadGeometryError(GlvortexError):
    """Domain violates an assumption (e.g. not star-shaped about its centroid)."""


class MeshMismatchError(GlvortexError):
    """Field array is not aligned with the mesh it is used with."""


class DivergedError(GlvortexError):
    """Line search failed to produce a descent step."""


class AllDivergedError(GlvortexError):
    """Every start of a multistart run diverged."""


class DegenerateOnLoopError(GlvortexError):
    """|u| too small somewhere on a winding loop."""


class DegenerateOnArcError(GlvortexError):
    """|u| too small somewhere on a boundary-index arc."""


class DegenerateOnAnnulusError(GlvortexError):
    """|u| too small somewhere on a polar-diagnostics annulus."""


class NotTangentialAtEndpointsError(GlvortexError):
    """Field is not approximately tangential at a boundary-index arc endpoint."""


class MissingCollarError(GlvortexError):
    """Mesh has no mirrored collar but one is required."""


class EmptyArcError(GlvortexError):
    """Circle does not intersect the domain."""


class QuadratureUnderflowError(GlvortexError):
    """Quadrature resolution too low to be meaningful."""


class ConfigError(GlvortexError):
    """Run configuration could not be parsed or validated."""
