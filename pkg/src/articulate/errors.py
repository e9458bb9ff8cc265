class ArticulateError(Exception):
    pass


class NormalizationError(ArticulateError, ValueError):
    """A vector that must be unit-length is not."""


class DegenerateVectorError(ArticulateError, ValueError):
    pass


class ShapeError(ArticulateError, ValueError):
    pass


class NonFiniteError(ArticulateError, FloatingPointError):
    pass


class GraphError(ArticulateError, RuntimeError):
    pass


class ConfigError(ArticulateError, ValueError):
    pass


class MissingPrerequisiteError(ArticulateError, FileNotFoundError):
    pass
