"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`ConcaveLiftError`, so callers (and the CLI) can separate numeric
failures from programming errors.
"""


class ConcaveLiftError(Exception):
    """Base class for all package errors."""


# numerics
class NumericError(ConcaveLiftError):
    pass


class NotHermitian(NumericError):
    pass


class NotPSD(NumericError):
    pass


class Singular(NumericError):
    pass


class NoConvergence(NumericError):
    pass


class NotMonotone(NumericError):
    pass


class NotProjector(NumericError):
    pass


# spaces and operators
class SpaceError(ConcaveLiftError):
    pass


class InvalidDepth(SpaceError):
    pass


class NotTower(SpaceError):
    pass


class LabelNotFound(SpaceError):
    pass


class DimensionMismatch(SpaceError):
    pass


class WindowTooDeep(SpaceError):
    pass


class WindowNotReducing(SpaceError):
    """A windowed functional calculus was asked of an operator that couples
    the window with the truncated remainder."""


class SpaceMismatch(SpaceError):
    pass


# constructions
class PreconditionFailed(ConcaveLiftError):
    """A construction's hypothesis does not hold for the given input.

    ``clause`` names the violated hypothesis.
    """

    def __init__(self, msg, clause=None):
        super().__init__(msg)
        self.clause = clause or type(self).__name__


class NotConcave(PreconditionFailed):
    pass


class NotRegular(PreconditionFailed):
    pass


class IsIsometric(PreconditionFailed):
    pass


class InvalidMajorant(PreconditionFailed):
    pass


class NotContraction(PreconditionFailed):
    pass


class NotLeftInvertible(PreconditionFailed):
    pass


class HypothesisNotMet(PreconditionFailed):
    pass


class GammaTooSmall(PreconditionFailed):
    pass


class GenerationFailed(ConcaveLiftError):
    pass


class UnknownGenerator(ConcaveLiftError):
    pass
