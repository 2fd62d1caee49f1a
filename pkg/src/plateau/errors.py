"""Exception hierarchy shared by every module.

The CLI maps :class:`PlateauError` subclasses to exit codes; anything in the
``StructuralError`` family is an input problem (exit 2), the rest are
computation failures.
"""


class PlateauError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(PlateauError):
    """Input cannot be interpreted as a valid complex."""


class ParseError(StructuralError):
    pass


class StructureError(StructuralError):
    pass


class OrientabilityError(StructuralError):
    pass


class EmbeddingError(StructuralError):
    pass


class DegenerateTriangleError(StructuralError):
    pass


class ResolutionError(PlateauError):
    pass


class FitRankError(PlateauError):
    pass


class IncompatibleFieldError(PlateauError):
    pass


class RegionUnknownError(PlateauError):
    pass


class SolverError(PlateauError):
    pass


class EmptySubspaceError(PlateauError):
    pass


class ExtentError(PlateauError):
    pass


class NotStationaryError(PlateauError):
    pass


class NotConeError(PlateauError):
    """Analytic cone mode requested on a complex that is not a cone at ``p0``."""


class StepDivergenceError(PlateauError):
    pass


class NotFlatError(PlateauError):
    pass


class UnrecognizedRegionError(PlateauError):
    pass


class ProjectionError(PlateauError):
    pass


class DisconnectedError(PlateauError):
    pass


class AngleDegeneracyError(PlateauError):
    pass


class UnknownCorpusError(PlateauError):
    pass
