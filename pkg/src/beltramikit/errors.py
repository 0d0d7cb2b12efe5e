"""Exception hierarchy shared by all modules."""


class BeltramiError(Exception):
    """Base class for every error raised by beltramikit."""


class DomainError(BeltramiError, ValueError):
    """An argument lies outside the domain of the operation."""


class NotElliptic(DomainError):
    """A conductivity (or Beltrami pair) violates the ellipticity bounds."""


class NonSymmetric(DomainError):
    """A matrix expected to be symmetric is not, within tolerance."""


class NonSpd(DomainError):
    """A matrix expected to be symmetric positive definite is not."""


class NumericalError(BeltramiError, ArithmeticError):
    """A quantity that is non-negative in exact arithmetic came out negative."""


class NotTight(BeltramiError):
    """K^min is strictly below K-hat, so no simultaneous diagonalization exists.

    Informative rather than a failure; carries both constants.
    """

    def __init__(self, kmin: float, khat: float):
        super().__init__(f"K^min={kmin!r} < K-hat={khat!r}: bound not tight")
        self.kmin = kmin
        self.khat = khat


class SingularTransform(DomainError):
    """The fractional-linear conductivity transform is undefined."""


class Infeasible(DomainError):
    """No diagonal rank-one connection exists inside the cone."""


class NotCollinear(DomainError):
    """A laminate split does not reproduce the parent matrix."""


class NotRankOne(DomainError):
    """The two matrices of a laminate split are not rank-one connected."""


class BadParameter(DomainError):
    """A laminate split parameter is outside the open interval (0, 1)."""


class SolverFailure(BeltramiError, RuntimeError):
    """The linear solver did not reach the requested residual."""


class BudgetExhausted(RuntimeWarning):
    """The numeric K^min search stopped at its evaluation budget before converging."""


class InvariantViolation(BeltramiError):
    """A constructed object failed its own structural checks (indicates a bug)."""
