"""Bounded solutions of linear difference equations with exponential
dichotomy on both semi-axes.

The main entry points are :func:`build_context`, :func:`solve_bounded`,
:func:`solvability_residual` and the brute-force cross-check
:func:`truncated_bounded_solve`.
"""

__version__ = "0.1.0"

from .errors import (
    DichoboundError,
    InfeasibleTruncation,
    InversionFailure,
    NotSolvable,
    UnitCircleEigenvalue,
)
from .linsys import ForcingSequence, OperatorSequence, StateSequence, apply_L
from .dichotomy import (
    DichotomyCertificate,
    certify,
    compute_projector_minus,
    compute_projector_plus,
    verify_dichotomy,
)
from .genpinv import build_D, check_commutation, classify, pseudo_inverse, verify_involution
from .green import (
    GreenContext,
    build_context,
    green_apply,
    jump,
    quasi_solve,
    rhs_g,
    solvability_residual,
    solve_bounded,
    solve_xi,
    weight_H,
)
from .oracle import TruncatedProblem, compare_mod_family, truncated_bounded_solve
