"""Exception hierarchy.

Every error raised on purpose by the package derives from ``AbsPoseError``.
Input-validation problems additionally derive from ``ValueError`` so plain
``except ValueError`` callers keep working.
"""


class AbsPoseError(Exception):
    pass


class ValidationError(AbsPoseError, ValueError):
    """Bad input data (maps to CLI exit code 1)."""


# geometry
class NonPositiveDepth(ValidationError):
    pass


class ZeroArea(ValidationError):
    pass


class ZeroExtent(ValidationError):
    pass


# root fitting
class DegenerateConfiguration(AbsPoseError):
    pass


class NoConsensus(AbsPoseError):
    pass


class EmptyMask(ValidationError):
    pass


# heatmaps / losses / regressor
class JointCountMismatch(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


# metrics
class DegenerateGt(ValidationError):
    pass


class EmptySet(ValidationError):
    pass


class TooFewPoints(ValidationError):
    pass


class SchemaMismatch(ValidationError):
    pass


# synthesis
class PlacementFailure(AbsPoseError):
    pass


class ConstantInput(ValidationError):
    pass


# io
class ParseError(ValidationError):
    pass


class SchemaError(ValidationError):
    pass
