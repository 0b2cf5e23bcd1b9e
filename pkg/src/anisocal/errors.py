"""Exception types shared across the package.

Every domain error derives from :class:`AnisocalError`, which the CLI maps to
exit code 1.
"""


class AnisocalError(Exception):
    """Base class for all domain errors."""


class NonInvertible(AnisocalError):
    """Deformation gradient with non-positive determinant."""


class AsymmetryTooLarge(AnisocalError):
    """Tensor violates a required index symmetry beyond tolerance."""


class DegenerateWeights(AnisocalError):
    """Eigenvalue weights of a second-order structure tensor sum to ~0."""


class DegenerateVectors(AnisocalError):
    """All direction vectors of a higher-order structure tensor vanish."""


class KindMismatch(AnisocalError):
    """Structure parameters do not fit the requested invariant set."""


class UnsupportedGroup(AnisocalError):
    """No reference invariant set exists for the requested symmetry group."""


class EmptyData(AnisocalError):
    """Normalization fitting requires at least two samples."""


class SchemaMismatch(AnisocalError):
    """Model file written by an incompatible schema version."""


class CorruptPayload(AnisocalError):
    """Model file cannot be parsed or is internally inconsistent."""


class EmptyBatch(AnisocalError):
    """Loss evaluated on an empty batch."""


class EmptyDataset(AnisocalError):
    """Operation requires at least one record."""


class MissingTangent(AnisocalError):
    """Tangent loss requested but records carry no tangent."""


class Diverged(AnisocalError):
    """Optimization produced a non-finite loss."""


class NoModelPassed(AnisocalError):
    """No structure-tensor order reached the error tolerance.

    The best model found is attached as ``model`` with its ``report``.
    """

    def __init__(self, message, model=None, report=None):
        super().__init__(message)
        self.model = model
        self.report = report


class SingularTangent(AnisocalError):
    """Tangent cannot be inverted to a compliance."""


class IoError(AnisocalError):
    """File could not be written or read."""
