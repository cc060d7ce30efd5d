"""Exception hierarchy shared by every module of the package."""


class FvClustError(Exception):
    """Base class for all package errors."""


class InvalidShape(FvClustError, ValueError):
    pass


class RankDeficient(FvClustError, ArithmeticError):
    pass


class NotSPD(FvClustError, ArithmeticError):
    pass


class NotOrthonormal(FvClustError, ValueError):
    pass


class NumericalBreakdown(FvClustError, ArithmeticError):
    pass


class DegenerateProjection(FvClustError, ArithmeticError):
    pass


class InfeasiblePoint(FvClustError, ValueError):
    pass


class SubproblemStalled(FvClustError, RuntimeError):
    """The semi-smooth Newton loop hit its iteration cap.

    ``best`` carries the best iterate seen (a ``ProxResult``) so the caller
    can decide whether to continue with it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class EmptyGraph(FvClustError, ValueError):
    pass


class IsolatedVertex(FvClustError, ValueError):
    def __init__(self, vertex):
        super().__init__(f"vertex {vertex} has zero affinity row sum")
        self.vertex = vertex


class EmptyCluster(FvClustError, RuntimeError):
    """Rounding left at least one column without any row.

    ``partition`` holds the labels obtained before the failure.
    """

    def __init__(self, message, partition=None):
        super().__init__(message)
        self.partition = partition


class SizeMismatch(FvClustError, ValueError):
    pass


class ParseError(FvClustError, ValueError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class InvalidSpec(FvClustError, ValueError):
    pass
