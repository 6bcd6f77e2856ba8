"""Exception hierarchy shared by all modules."""


class KemenyError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(KemenyError, ValueError):
    """Input violates a documented precondition."""


class ReducibleChainError(KemenyError):
    """The chain (or a product of chains) is not irreducible.

    Attributes
    ----------
    n_components : int
        Number of strongly connected components of the sparsity digraph.
    """

    def __init__(self, message, n_components=None):
        super().__init__(message)
        self.n_components = n_components


class SingularMatrixError(KemenyError):
    """A factorization met a zero (or negative) pivot."""


class ConvergenceError(KemenyError):
    """An iterative method failed to reach its tolerance.

    Attributes
    ----------
    residual : float
        Relative residual of the best iterate.
    iterations : int
        Iterations performed.
    x : ndarray or None
        Best iterate, when one exists.
    """

    def __init__(self, message, residual=float("nan"), iterations=0, x=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.x = x
