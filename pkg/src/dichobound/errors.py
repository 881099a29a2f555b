"""Exception types raised by the package.

Each exception maps to a CLI exit code through ``exit_code``.
"""


class DichoboundError(Exception):
    exit_code = 1


class InversionFailure(DichoboundError):
    """A matrix that must be invertible is numerically singular."""


class RangeTooShort(DichoboundError):
    pass


class RangeMismatch(DichoboundError):
    pass


class ShapeMismatch(DichoboundError):
    pass


class NotIdempotent(DichoboundError):
    pass


class UnitCircleEigenvalue(DichoboundError):
    """A tail matrix has an eigenvalue too close to the unit circle."""

    exit_code = 2

    def __init__(self, mu, gap_tol):
        self.mu = mu
        self.gap_tol = gap_tol
        super().__init__(
            f"eigenvalue {mu:.6g} lies within {gap_tol:g} of the unit circle; "
            "no exponential dichotomy"
        )


class WrongAxis(DichoboundError):
    pass


class NotSolvable(DichoboundError):
    """The solvability condition fails; carries the offending report."""

    exit_code = 3

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"no bounded solution: solvability residual {report.residual_norm:.6g}"
        )


class InfeasibleTruncation(DichoboundError):
    exit_code = 3

    def __init__(self, residual, threshold):
        self.residual = residual
        self.threshold = threshold
        super().__init__(
            f"truncated problem infeasible: least-squares residual "
            f"{residual:.6g} > {threshold:.3g}"
        )


class ProblemParseError(DichoboundError):
    exit_code = 1


class VerificationFailure(DichoboundError):
    exit_code = 4

    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__("verification failed: " + ", ".join(self.failed))


class UnknownDemo(DichoboundError):
    exit_code = 1
