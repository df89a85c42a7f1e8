"""Exception hierarchy shared by every module of the package."""


class NLSGraphError(Exception):
    """Base class for all package errors."""


class GraphError(NLSGraphError):
    pass


class DisconnectedGraph(GraphError):
    pass


class NonPositiveLength(GraphError):
    pass


class DanglingVertexReference(GraphError):
    pass


class InvalidParameter(NLSGraphError, ValueError):
    pass


class GraphParseError(GraphError):
    pass


class ConflictingVertexValues(NLSGraphError):
    pass


class NoConvergence(NLSGraphError):
    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class MassMismatch(NLSGraphError):
    pass


class SolverFailure(NLSGraphError):
    """Raised by iterative solvers; ``state`` holds the last iterate if any."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class MaxItersExceeded(SolverFailure):
    pass


class SingularJacobian(SolverFailure):
    pass


class Diverged(SolverFailure):
    pass


class PathCollapse(SolverFailure):
    pass


class EdgeTooShort(SolverFailure):
    pass


class StepFloorReached(SolverFailure):
    pass


class NoPeaks(NLSGraphError):
    pass


class WindowExceedsGraph(NLSGraphError):
    pass
