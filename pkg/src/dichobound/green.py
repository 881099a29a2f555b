"""Bounded solutions on the whole integer axis.

A solution bounded on each semi-axis is

    n >= 0:  U(n) P xi + sum_{0<=k<n} U(n) P U(k+1)^{-1} h_k
                       - sum_{k>=n}   U(n) (I-P) U(k+1)^{-1} h_k
    n <= 0:  U(n) (I-Q) xi + sum_{k<n} U(n) Q U(k+1)^{-1} h_k
                           - sum_{n<=k<=-1} U(n) (I-Q) U(k+1)^{-1} h_k

and the two halves agree at 0 exactly when ``D xi = g`` with

    g = sum_{k>=0} (I-P) U(k+1)^{-1} h_k + sum_{k<=-1} Q U(k+1)^{-1} h_k.

That equation is solvable iff ``P_coker g = 0``, which is the same as
``sum_k P_coker Q U(k+1)^{-1} h_k = 0``.  The Green's operator takes
``xi = D^+ g``.  Forcings have finite support so every series is a finite sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .dichotomy import (
    DEFAULT_GAP_TOL,
    AxisSplitting,
    compute_projector_minus,
    compute_projector_plus,
)
from .errors import NotSolvable, ShapeMismatch
from .genpinv import (
    DEFAULT_RANK_TOL_REL,
    Classification,
    GeneralizedInverse,
    build_D,
    classify,
    pseudo_inverse,
    range_basis,
)
from .linsys import ForcingSequence, OperatorSequence, StateSequence

DEFAULT_SOLVABILITY_TOL = 1e-8


@dataclass(frozen=True)
class GreenContext:
    """Everything the Green's operator needs, computed once per system."""

    seq: OperatorSequence
    P: np.ndarray
    Q: np.ndarray
    plus: AxisSplitting
    minus: AxisSplitting
    gi: GeneralizedInverse
    classification: Classification
    solvability_tol: float = DEFAULT_SOLVABILITY_TOL
    # columns: orthonormal basis of range(P P_ker), one per free parameter
    family_basis: np.ndarray = field(default=None)
    # columns: orthonormal basis of range(P_coker Q); rows of H_d after transposing
    condition_basis: np.ndarray = field(default=None)

    @property
    def dim(self) -> int:
        return self.seq.dim


def build_context(
    seq: OperatorSequence,
    gap_tol: float = DEFAULT_GAP_TOL,
    rank_tol_rel: float = DEFAULT_RANK_TOL_REL,
    solvability_tol: float = DEFAULT_SOLVABILITY_TOL,
    P=None,
    Q=None,
) -> GreenContext:
    """Compute ``P``, ``Q``, ``D^+`` and the classification for ``seq``.

    ``P`` and ``Q`` may be passed explicitly; otherwise they come from the
    tail spectral splitting.
    """
    if P is None:
        P = compute_projector_plus(seq, gap_tol)
    if Q is None:
        Q = compute_projector_minus(seq, gap_tol)
    P = np.array(P, dtype=float)
    Q = np.array(Q, dtype=float)
    D = build_D(P, Q)
    gi = pseudo_inverse(D, rank_tol_rel)
    cls = classify(gi, P, Q)
    fam = range_basis(P @ gi.proj_ker, np.linalg.norm(P, 2), rank_tol_rel)
    cond = range_basis(gi.proj_coker @ Q, np.linalg.norm(Q, 2), rank_tol_rel)
    return GreenContext(
        seq=seq,
        P=P,
        Q=Q,
        plus=AxisSplitting(seq, "plus", P),
        minus=AxisSplitting(seq, "minus", Q),
        gi=gi,
        classification=cls,
        solvability_tol=solvability_tol,
        family_basis=fam,
        condition_basis=cond,
    )


def _check_dim(ctx, h):
    if h.dim != ctx.dim:
        raise ShapeMismatch(f"forcing dimension {h.dim} != system dimension {ctx.dim}")


def weight_H_pair(ctx: GreenContext, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Both forms of ``H(n+1)``: ``P_coker Q U(n+1)^{-1}`` and ``P_coker (I-P) U(n+1)^{-1}``.

    Each form is evaluated through the decaying kernel when one is available
    (the ``Q`` form for ``n+1 <= 0``, the ``I - P`` form for ``n+1 >= 0``).
    """
    m = int(n) + 1
    pc = ctx.gi.proj_coker
    if m <= 0:
        via_q = pc @ ctx.minus.forward(0, m)
        via_p = pc @ (np.eye(ctx.dim) - ctx.P) @ ctx.seq.u_inv(m)
    else:
        via_q = pc @ ctx.Q @ ctx.seq.u_inv(m)
        via_p = pc @ ctx.plus.backward(0, m)
    return via_q, via_p


def weight_H(ctx: GreenContext, n: int) -> np.ndarray:
    """``H(n+1) = P_coker Q U(n+1)^{-1}``, the solvability weight of ``h_n``."""
    via_q, via_p = weight_H_pair(ctx, n)
    return via_q if int(n) + 1 <= 0 else via_p


def weight_H_d(ctx: GreenContext, n: int) -> np.ndarray:
    """The ``d`` independent rows of ``H(n+1)`` (shape ``(d, dim)``)."""
    return ctx.condition_basis.T @ weight_H(ctx, n)


@dataclass(frozen=True)
class SolvabilityReport:
    residual_vector: np.ndarray
    residual_norm: float
    d_conditions: int
    solvable: bool
    conditions: np.ndarray
    forcing_norm: float

    def as_dict(self) -> dict:
        return {
            "residual_vector": [float(v) for v in self.residual_vector],
            "residual_norm": float(self.residual_norm),
            "d_conditions": int(self.d_conditions),
            "solvable": bool(self.solvable),
            "conditions": [float(v) for v in self.conditions],
        }


def solvability_residual(ctx: GreenContext, h: ForcingSequence) -> SolvabilityReport:
    """Evaluate ``sum_k H(k+1) h_k`` over the support of ``h``."""
    _check_dim(ctx, h)
    res = np.zeros(ctx.dim)
    for k, hk in h.items():
        res += weight_H(ctx, k) @ hk
    nrm = float(np.linalg.norm(res))
    hn = h.sup_norm()
    return SolvabilityReport(
        residual_vector=res,
        residual_norm=nrm,
        d_conditions=ctx.classification.d,
        solvable=nrm <= ctx.solvability_tol * (1.0 + hn),
        conditions=ctx.condition_basis.T @ res,
        forcing_norm=hn,
    )


def rhs_g(ctx: GreenContext, h: ForcingSequence) -> np.ndarray:
    """Right-hand side ``g`` of the matching equation ``D xi = g``."""
    _check_dim(ctx, h)
    g = np.zeros(ctx.dim)
    for k, hk in h.items():
        if k >= 0:
            g += ctx.plus.backward(0, k + 1) @ hk
        else:
            g += ctx.minus.forward(0, k + 1) @ hk
    return g


def solve_xi(ctx: GreenContext, g) -> np.ndarray:
    """Particular solution ``D^+ g`` of ``D xi = g``.

    Raises :class:`NotSolvable` when ``P_coker g`` is not negligible.
    """
    g = np.asarray(g, dtype=float)
    defect = ctx.gi.proj_coker @ g
    nrm = float(np.linalg.norm(defect))
    if nrm > ctx.solvability_tol * (1.0 + float(np.linalg.norm(g))):
        report = SolvabilityReport(
            residual_vector=defect,
            residual_norm=nrm,
            d_conditions=ctx.classification.d,
            solvable=False,
            conditions=ctx.condition_basis.T @ defect,
            forcing_norm=float("nan"),
        )
        raise NotSolvable(report)
    return ctx.gi.d_pinv @ g


def _branch(n, branch):
    if branch is None:
        return "plus" if n >= 0 else "minus"
    if branch not in ("plus", "minus"):
        raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")
    if branch == "plus" and n < 0 or branch == "minus" and n > 0:
        raise ValueError(f"branch {branch!r} is not defined at n={n}")
    return branch


def semiaxis_solution(ctx: GreenContext, xi, h: ForcingSequence, n: int,
                      branch: Optional[str] = None) -> np.ndarray:
    """Value at ``n`` of the semi-axis bounded solution with parameter ``xi``.

    At ``n = 0`` both halves are defined; ``branch`` selects one (default
    ``"plus"``).
    """
    _check_dim(ctx, h)
    n = int(n)
    xi = np.asarray(xi, dtype=float)
    if _branch(n, branch) == "plus":
        x = ctx.plus.forward(n, 0) @ xi
        for k, hk in h.items():
            if 0 <= k < n:
                x = x + ctx.plus.forward(n, k + 1) @ hk
            elif k >= n:
                x = x - ctx.plus.backward(n, k + 1) @ hk
    else:
        x = ctx.minus.backward(n, 0) @ xi
        for k, hk in h.items():
            if k < n:
                x = x + ctx.minus.forward(n, k + 1) @ hk
            elif k <= -1:
                x = x - ctx.minus.backward(n, k + 1) @ hk
    return x


def green_apply(ctx: GreenContext, h: ForcingSequence, n: int,
                branch: Optional[str] = None, g=None) -> np.ndarray:
    """``G[h](n) = U(n) Z(n)`` with ``D^- = D^+``.

    The glue term ``D^+ g`` does not require solvability, so this also
    evaluates the quasisolution.
    """
    if g is None:
        g = rhs_g(ctx, h)
    return semiaxis_solution(ctx, ctx.gi.d_pinv @ g, h, n, branch)


def green_kernel_z(ctx: GreenContext, h: ForcingSequence, n: int,
                   branch: Optional[str] = None) -> np.ndarray:
    """``Z(n)`` evaluated term by term with explicit ``U(k+1)^{-1}``.

    Only well conditioned for moderate ``|n|`` and support; ``U(n) Z(n)``
    must agree with :func:`green_apply`.
    """
    _check_dim(ctx, h)
    n = int(n)
    seq = ctx.seq
    eye = np.eye(ctx.dim)
    P, Q, Dp = ctx.P, ctx.Q, ctx.gi.d_pinv
    g = np.zeros(ctx.dim)
    for k, hk in h.items():
        if k >= 0:
            g += (eye - P) @ seq.u_inv(k + 1) @ hk
        else:
            g += Q @ seq.u_inv(k + 1) @ hk
    z = np.zeros(ctx.dim)
    if _branch(n, branch) == "plus":
        for k, hk in h.items():
            if 0 <= k < n:
                z += P @ seq.u_inv(k + 1) @ hk
            elif k >= n:
                z -= (eye - P) @ seq.u_inv(k + 1) @ hk
        z += P @ Dp @ g
    else:
        for k, hk in h.items():
            if k < n:
                z += Q @ seq.u_inv(k + 1) @ hk
            elif n <= k <= -1:
                z -= (eye - Q) @ seq.u_inv(k + 1) @ hk
        z += (eye - Q) @ Dp @ g
    return z


def jump(ctx: GreenContext, h: ForcingSequence) -> np.ndarray:
    """``G[h](0+0) - G[h](0-0)``, the mismatch of the two halves at 0.

    Equals ``-P_coker g``; it vanishes exactly on solvable forcings.
    """
    g = rhs_g(ctx, h)
    return (green_apply(ctx, h, 0, "plus", g=g)
            - green_apply(ctx, h, 0, "minus", g=g))


@dataclass(frozen=True)
class BoundedSolutionFamily:
    """``x(c) = particular + sum_j c_j basis[j]`` on an output window."""

    particular: StateSequence
    basis: List[StateSequence]
    r: int
    xi_particular: np.ndarray
    defect: np.ndarray
    report: SolvabilityReport

    @property
    def defect_norm(self) -> float:
        return float(np.linalg.norm(self.defect))

    def member(self, c) -> StateSequence:
        c = np.asarray(c, dtype=float).reshape(-1)
        if c.shape != (self.r,):
            raise ShapeMismatch(f"need {self.r} coefficients, got {c.shape}")
        vals = self.particular.values.copy()
        for cj, b in zip(c, self.basis):
            vals = vals + cj * b.values
        return StateSequence(self.particular.start, vals)


def homogeneous_basis(ctx: GreenContext, window) -> List[StateSequence]:
    """Bounded solutions ``n -> U(n) b_j`` of the homogeneous equation.

    ``b_j`` runs over an orthonormal basis of ``range(P P_ker)``, which lies
    in both ``range(P)`` and ``range(I - Q)``.
    """
    lo, hi = int(window[0]), int(window[1])
    out = []
    for b in ctx.family_basis.T:
        vals = np.empty((hi - lo + 1, ctx.dim))
        for i, n in enumerate(range(lo, hi + 1)):
            if n >= 0:
                vals[i] = ctx.plus.forward(n, 0) @ b
            else:
                vals[i] = ctx.minus.backward(n, 0) @ b
        out.append(StateSequence(lo, vals))
    return out


def _family(ctx, h, window, report):
    lo, hi = int(window[0]), int(window[1])
    if lo > hi:
        raise ValueError(f"empty output window {window}")
    g = rhs_g(ctx, h)
    xi = ctx.gi.d_pinv @ g
    vals = np.empty((hi - lo + 1, ctx.dim))
    for i, n in enumerate(range(lo, hi + 1)):
        vals[i] = semiaxis_solution(ctx, xi, h, n)
    defect = (semiaxis_solution(ctx, xi, h, 0, "plus")
              - semiaxis_solution(ctx, xi, h, 0, "minus"))
    basis = homogeneous_basis(ctx, (lo, hi))
    return BoundedSolutionFamily(
        particular=StateSequence(lo, vals),
        basis=basis,
        r=len(basis),
        xi_particular=xi,
        defect=defect,
        report=report,
    )


def solve_bounded(ctx: GreenContext, h: ForcingSequence, output_window) -> BoundedSolutionFamily:
    """All solutions bounded on the integer axis, sampled on ``output_window``.

    Raises :class:`NotSolvable` carrying the :class:`SolvabilityReport` when
    the solvability condition fails.
    """
    report = solvability_residual(ctx, h)
    if not report.solvable:
        raise NotSolvable(report)
    return _family(ctx, h, output_window, report)


def quasi_solve(ctx: GreenContext, h: ForcingSequence, output_window) -> BoundedSolutionFamily:
    """Least-squares glued solution for any forcing.

    ``xi = D^+ g`` minimizes the mismatch ``||D xi - g||`` of the two bounded
    halves at 0; the remaining mismatch is returned as ``defect`` (norm
    ``||P_coker g||``) and shows up in the residual at ``n = -1`` only.
    """
    report = solvability_residual(ctx, h)
    return _family(ctx, h, output_window, report)
