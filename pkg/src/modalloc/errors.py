"""Exception hierarchy.

Every domain failure raised by the package derives from ``ModalAllocError``;
the CLI maps these to exit code 1.
"""


class ModalAllocError(Exception):
    """Base class for all domain errors."""


class DimensionMismatch(ModalAllocError, ValueError):
    pass


class ConfigError(ModalAllocError, ValueError):
    pass


class NonFiniteState(ModalAllocError):
    pass


class RepeatedEigenvalue(ModalAllocError):
    pass


class SingularTransform(ModalAllocError):
    pass


class InvalidTarget(ModalAllocError, ValueError):
    pass


class NotHurwitz(ModalAllocError):
    pass


class OrderTooLarge(ModalAllocError, ValueError):
    pass


class RankDeficient(ModalAllocError):
    pass


class NonConvex(ModalAllocError):
    pass


class DimensionTooLarge(ModalAllocError, ValueError):
    pass


class MaxIterations(ModalAllocError):
    """Active-set iteration limit reached.

    The best iterate found so far is attached as ``solution``.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class SolverFailure(ModalAllocError):
    def __init__(self, message, iterations=None, kkt_residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.kkt_residual = kkt_residual


class IllConditioned(ModalAllocError):
    pass


class NoMatchingMode(ModalAllocError):
    pass


class InsufficientRedundancy(ModalAllocError, ValueError):
    pass


class Unstable(ModalAllocError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
