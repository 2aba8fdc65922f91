"""Exception classes raised across the package."""


class GraspqError(Exception):
    """Base class for every error raised by graspq."""


class InvalidInput(GraspqError, ValueError):
    pass


class DegenerateInput(GraspqError, ValueError):
    pass


class DegenerateRange(GraspqError, ValueError):
    pass


class InvalidThresholds(GraspqError, ValueError):
    pass


class MissingJacobian(GraspqError):
    pass


class MissingNormalization(GraspqError):
    pass


class MissingFeature(GraspqError, KeyError):
    def __init__(self, grasp_id, metric):
        super().__init__(f"record {grasp_id!r} has no value for {metric!r}")
        self.grasp_id = grasp_id
        self.metric = metric

    def __str__(self):
        return self.args[0]


class MetricError(GraspqError):
    """Wraps a failure inside one metric so callers know which one broke."""

    def __init__(self, metric, cause):
        super().__init__(f"{metric}: {cause}")
        self.metric = metric
        self.cause = cause


class ParseError(GraspqError, ValueError):
    def __init__(self, message, line=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class DuplicateId(GraspqError, ValueError):
    pass


class StratificationError(GraspqError, ValueError):
    pass


class UnsupportedModelVersion(GraspqError):
    pass


class SchemaError(GraspqError, ValueError):
    pass
