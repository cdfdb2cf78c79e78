"""Exception types shared across the library.

Every error raised on a contract violation derives from ArtifactError so the
CLI can map validation failures to a usage exit code in one place.
"""


class ArtifactError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(ArtifactError):
    pass


class RankDeficient(ArtifactError):
    pass


class ConvergenceFailure(ArtifactError):
    pass


class ZeroMatrix(ArtifactError):
    pass


class InvalidRange(ArtifactError):
    pass


class NoComplement(ArtifactError):
    pass


class Underresolved(ArtifactError):
    pass


class PecletViolation(ArtifactError):
    pass


class SingularOperator(ArtifactError):
    pass


class ZeroEigenvalue(ArtifactError):
    pass


class EmptyTail(ArtifactError):
    pass


class InsufficientData(ArtifactError):
    pass


class CertificateFailure(ArtifactError):
    """A provable inequality failed numerically: implementation bug, not data."""
