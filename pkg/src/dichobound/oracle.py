"""Brute-force bounded solver on a truncated window.

Unknowns ``x_{-N}, ..., x_N`` are stacked into one vector.  The rows are the
difference equation on ``[-N, N-1]`` and two boundary conditions that are
exact for finitely supported forcing: beyond the window and the support a
bounded orbit must sit in the stable subspace of ``tail_plus`` at ``N`` and
in the unstable subspace of ``tail_minus`` at ``-N``.  The stacked system is
solved by minimal-norm least squares.

The boundary projectors come from an eigendecomposition of each tail, not
from the dichotomy module, and nothing here touches ``D`` or the Green's
kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import InfeasibleTruncation, RangeMismatch, ShapeMismatch, UnitCircleEigenvalue
from .linsys import ForcingSequence, OperatorSequence, StateSequence

INFEASIBLE_TOL = 1e-6


def tail_stable_projector(tail, gap_tol: float = 1e-8) -> np.ndarray:
    """Projector onto the stable eigenspace of ``tail`` along the unstable one."""
    w, V = np.linalg.eig(np.asarray(tail, dtype=float))
    for mu in w:
        if abs(abs(mu) - 1.0) < gap_tol:
            raise UnitCircleEigenvalue(mu, gap_tol)
    mask = (np.abs(w) < 1.0).astype(float)
    proj = V @ np.diag(mask) @ np.linalg.inv(V)
    return proj.real


@dataclass(frozen=True)
class TruncatedProblem:
    seq: OperatorSequence
    h: ForcingSequence
    half_width: int
    p_at_N: np.ndarray
    q_at_minus_N: np.ndarray

    @classmethod
    def build(cls, seq: OperatorSequence, h: ForcingSequence, half_width: int,
              gap_tol: float = 1e-8) -> "TruncatedProblem":
        N = int(half_width)
        support = h.support
        if not (-N < seq.window_lo and seq.window_hi < N):
            raise RangeMismatch(
                f"half width {N} does not strictly contain the operator window "
                f"[{seq.window_lo}, {seq.window_hi}]"
            )
        if support and not (-N < min(support) and max(support) < N - 1):
            raise RangeMismatch(
                f"half width {N} does not strictly contain the forcing support "
                f"[{min(support)}, {max(support)}]"
            )
        return cls(
            seq=seq,
            h=h,
            half_width=N,
            p_at_N=tail_stable_projector(seq.tail_plus, gap_tol),
            q_at_minus_N=tail_stable_projector(seq.tail_minus, gap_tol),
        )


def default_half_width(seq: OperatorSequence, h: ForcingSequence, minimum: int = 20) -> int:
    support = h.support or [0]
    reach = max(-seq.window_lo, seq.window_hi, -min(support), max(support) + 1)
    return max(minimum, reach + 5)


def stacked_system(p: TruncatedProblem):
    """The stacked matrix and right-hand side of the truncated problem."""
    seq, N, dim = p.seq, p.half_width, p.seq.dim
    count = 2 * N + 1
    rows = 2 * N * dim + 2 * dim
    M = np.zeros((rows, count * dim))
    b = np.zeros(rows)
    for i, n in enumerate(range(-N, N)):
        r0 = i * dim
        M[r0:r0 + dim, (i + 1) * dim:(i + 2) * dim] = np.eye(dim)
        M[r0:r0 + dim, i * dim:(i + 1) * dim] = -seq.operator_at(n)
        b[r0:r0 + dim] = p.h(n)
    r0 = 2 * N * dim
    M[r0:r0 + dim, (count - 1) * dim:] = np.eye(dim) - p.p_at_N
    M[r0 + dim:r0 + 2 * dim, :dim] = p.q_at_minus_N
    return M, b


def truncated_bounded_solve(p: TruncatedProblem, tol: float = INFEASIBLE_TOL) -> StateSequence:
    """Minimal-norm least-squares solution of the truncated problem.

    Raises :class:`InfeasibleTruncation` when the least-squares residual
    exceeds ``tol * (1 + |||h|||)``.
    """
    M, b = stacked_system(p)
    x, *_ = scipy.linalg.lstsq(M, b, lapack_driver="gelsd")
    resid = float(np.linalg.norm(M @ x - b))
    threshold = tol * (1.0 + p.h.sup_norm())
    if resid > threshold:
        raise InfeasibleTruncation(resid, threshold)
    N = p.half_width
    return StateSequence(-N, x.reshape(2 * N + 1, p.seq.dim))


def compare_mod_family(x: StateSequence, y: StateSequence,
                       basis: Sequence[StateSequence] = (),
                       window: Optional[tuple] = None) -> float:
    """Sup-distance between ``x`` and ``y`` modulo ``span(basis)``.

    The coefficients are fitted by least squares on the stacked samples of
    ``window`` (default: the common range of ``x`` and ``y``); the returned
    value is the max-norm of what is left.
    """
    if x.dim != y.dim:
        raise ShapeMismatch(f"dimensions differ: {x.dim} vs {y.dim}")
    lo = max(x.start, y.start)
    hi = min(x.stop, y.stop) - 1
    if window is not None:
        lo, hi = int(window[0]), int(window[1])
    if hi < lo:
        raise RangeMismatch("sequences share no indices")
    diff = x.restrict(lo, hi).values - y.restrict(lo, hi).values
    if basis:
        B = np.stack([b.restrict(lo, hi).values.reshape(-1) for b in basis], axis=1)
        c, *_ = np.linalg.lstsq(B, diff.reshape(-1), rcond=None)
        diff = diff - (B @ c).reshape(diff.shape)
    return float(np.max(np.linalg.norm(diff, axis=1)))
