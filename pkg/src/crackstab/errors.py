"""Exception hierarchy shared by all modules."""


class CrackstabError(Exception):
    """Base class for every error raised by the package."""


class OutOfRangeError(CrackstabError, ValueError):
    """A parameter lies outside the range where an operation is defined."""


class SolverError(CrackstabError, RuntimeError):
    """A linear or eigenvalue solver failed to produce a trustworthy answer."""


class OperatorNotPositiveError(CrackstabError, ValueError):
    """``-d^2/dx^2 + a`` is not positive definite on the crack.

    Without positivity the bilinear form ``int a phi psi + int phi' psi'`` is
    not a scalar product, the resolvent is undefined and ``lambda1`` loses
    its meaning.
    """


class PoleProximityError(CrackstabError, ValueError):
    """A series was evaluated too close to one of its poles."""

    def __init__(self, n, pole, lam):
        super().__init__(
            f"lambda={lam!r} is within 1e-9 of the pole of term n={n} (pole={pole!r})"
        )
        self.n = n
        self.pole = pole
        self.lam = lam
