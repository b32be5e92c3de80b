"""Exception types raised across the package."""


class MeshError(ValueError):
    """Base class for invalid mesh input."""


class MeshFormatError(MeshError):
    """Malformed mesh text (bad header, wrong token count, ...)."""


class IndexRangeError(MeshError):
    """An element references a vertex that does not exist."""


class DegenerateElementError(MeshError):
    """An element has (numerically) zero measure or repeated vertices."""


class NonconformingMeshError(MeshError):
    """Faces shared by more than two elements, or hanging nodes."""


class GeometryError(ValueError):
    """The two-step decomposition of an element could not be built."""


class UndefinedRatioError(ArithmeticError):
    """A ratio harness was asked for a quotient with a zero denominator."""


class InadmissibleExponentsError(ValueError):
    """The exponent pair (q, p) violates the embedding or ordering contract."""


class SingularSystemError(ArithmeticError):
    """A matrix expected to be positive definite is numerically singular."""
