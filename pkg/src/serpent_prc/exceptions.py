"""Exception hierarchy shared across the package."""


class SerpentPRCError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(SerpentPRCError, ValueError):
    pass


class JointRangeError(SerpentPRCError, ValueError):
    pass


class UnrecoverablePoseError(SerpentPRCError, ValueError):
    pass


class NonFiniteInputError(SerpentPRCError, ValueError):
    pass


class InsufficientDataError(SerpentPRCError, ValueError):
    pass


class WindowError(SerpentPRCError, ValueError):
    pass


class ShapeError(SerpentPRCError, ValueError):
    pass


class SingularMatrixError(SerpentPRCError, ArithmeticError):
    pass


class TrainingDivergedError(SerpentPRCError, ArithmeticError):
    pass


class ConfigMismatchError(SerpentPRCError):
    """An artifact on disk was produced under a different configuration."""
