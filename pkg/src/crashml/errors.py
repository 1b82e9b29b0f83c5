"""Exception hierarchy shared by every stage of the pipeline."""


class CrashMLError(Exception):
    """Base class; the CLI maps these to a nonzero exit."""


class ParseError(CrashMLError):
    pass


class DomainError(CrashMLError):
    pass


class StratificationError(CrashMLError):
    pass


class DegenerateClassError(CrashMLError):
    pass


class ClusteringError(CrashMLError):
    pass


class ResampleError(CrashMLError):
    pass


class TrainingError(CrashMLError):
    pass


class CalibrationError(CrashMLError):
    pass


class ModelStateError(CrashMLError):
    pass


class ShapeError(CrashMLError, ValueError):
    pass


class CompositionError(CrashMLError):
    pass


class UndefinedMetricError(CrashMLError):
    pass
