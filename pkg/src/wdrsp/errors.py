"""Exception hierarchy shared by every module.

Each exception class name doubles as the error code reported by the CLI,
so keep the names stable.
"""


class WdrspError(Exception):
    """Base class for all package errors."""

    exit_code = 1

    @property
    def code(self) -> str:
        return type(self).__name__


# graph
class NetworkError(WdrspError):
    pass


class DanglingArc(NetworkError):
    pass


class DuplicateArc(NetworkError):
    pass


class SelfLoop(NetworkError):
    pass


class Unreachable(NetworkError):
    pass


class TooManyPaths(NetworkError):
    pass


class InvalidPath(NetworkError):
    pass


# samples
class SampleError(WdrspError):
    pass


class IoError(SampleError):
    pass


class ShapeMismatch(SampleError):
    pass


class BadValue(SampleError):
    pass


class BadConstant(SampleError):
    pass


class SampleOutsideBox(SampleError):
    pass


# solver
class SolverError(WdrspError):
    exit_code = 2


class NumericalFailure(SolverError):
    pass


class NodeLimit(SolverError):
    pass


class InfeasibleModel(SolverError):
    pass


# models
class UnsupportedNorm(WdrspError):
    pass


class AlphaOutOfRange(WdrspError):
    pass


class BudgetNegative(WdrspError):
    pass


class BadWeights(WdrspError):
    pass


class InfeasibleFlow(WdrspError):
    exit_code = 2


class BadMu(WdrspError):
    pass
