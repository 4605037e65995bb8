"""Exception types raised by the pipeline."""


class PolysegError(ValueError):
    """Base class for validation errors raised by this package."""


class EmptyMaskError(PolysegError):
    """An operation required at least one set pixel in an instance mask."""


class DimensionMismatchError(PolysegError):
    """Two grids that must share dimensions do not."""


class ShapeMismatchError(PolysegError):
    """Tensor arguments have incompatible shapes."""


class BadVertexCountError(PolysegError):
    """Requested polygon vertex count is not a positive multiple of 4."""


class TooManyObjectsError(PolysegError):
    """More annotated instances than the ground-truth padding allows."""


class OutOfBoundsError(PolysegError):
    """A coordinate fell outside the target grid."""


class DivergenceError(PolysegError):
    """The direct-fit optimizer produced a non-finite loss."""


class FileFormatError(PolysegError):
    """A file did not match the expected on-disk format."""
