"""Exception hierarchy.

Every error raised on a contract violation derives from
:class:`CompographError`, which the CLI maps to exit code 1.
:class:`NumericFailure` is the exception mapped to exit code 2.
"""


class CompographError(ValueError):
    """Base class for validation and data errors."""


class NumericFailure(RuntimeError):
    """A computation produced non-finite values."""


# compositional geometry
class NonPositiveEntry(CompographError):
    pass


class TooShort(CompographError):
    pass


class KTooSmall(CompographError):
    pass


class RankDeficient(CompographError):
    pass


class DimMismatch(CompographError):
    pass


class BadSubset(CompographError):
    pass


class BadIndices(CompographError):
    pass


# graph input
class ParseError(CompographError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class EmptyGraph(CompographError):
    pass


class UnknownNode(CompographError):
    pass


class Disconnected(CompographError):
    pass


class TooDense(CompographError):
    pass


# model / training
class SelfPair(CompographError):
    pass


class ShapeMismatch(CompographError):
    pass


# evaluation
class OneClassOnly(CompographError):
    pass


class NoPositives(CompographError):
    pass


class DegenerateSplit(CompographError):
    pass


class BadKeepSize(CompographError):
    pass


class NoLabels(CompographError):
    pass


class TargetUnreachable(CompographError):
    pass


class DegenerateDataWarning(UserWarning):
    """PCA input has fewer than two directions of variance."""
