"""Exponential dichotomy data on the two semi-axes.

For eventually constant families the dichotomy projectors are obtained from
the stable/unstable invariant subspaces of the tail matrices (ordered real
Schur form) and transported to time 0 through the window.

:class:`AxisSplitting` evaluates the restricted evolution kernels

    forward(n, m)  = U(n) P U(m)^{-1},        n >= m
    backward(n, m) = U(n) (I - P) U(m)^{-1},  n <= m

by stepping one matrix at a time and re-applying the transported projector
after each step.  Mathematically this changes nothing (``A_j P_j = P_{j+1}
A_j``), but rounding errors that leak into the growing directions are removed
at every step, so the kernels stay accurate even when ``U(n)`` itself is
badly conditioned.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import ShapeMismatch, UnitCircleEigenvalue, WrongAxis
from .linsys import OperatorSequence

DEFAULT_GAP_TOL = 1e-8


class Axis(str, enum.Enum):
    PLUS = "plus"
    MINUS = "minus"


def _check_gap(eigs, gap_tol):
    for mu in eigs:
        if abs(abs(mu) - 1.0) < gap_tol:
            raise UnitCircleEigenvalue(mu, gap_tol)


def invariant_subspaces(tail, gap_tol: float = DEFAULT_GAP_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases of the stable and unstable invariant subspaces.

    Returns ``(S, W)`` with ``S`` spanning the eigenvalues ``|mu| < 1`` and
    ``W`` those with ``|mu| > 1``.  Raises :class:`UnitCircleEigenvalue` when
    some eigenvalue is within ``gap_tol`` of the unit circle.
    """
    tail = np.asarray(tail, dtype=float)
    _check_gap(np.linalg.eigvals(tail), gap_tol)
    _, z_in, n_in = scipy.linalg.schur(tail, output="real", sort="iuc")
    _, z_out, n_out = scipy.linalg.schur(tail, output="real", sort="ouc")
    if n_in + n_out != tail.shape[0]:
        # Reordering can misplace eigenvalues that sit right at the threshold.
        raise UnitCircleEigenvalue(
            min(np.linalg.eigvals(tail), key=lambda mu: abs(abs(mu) - 1.0)), gap_tol
        )
    return z_in[:, :n_in], z_out[:, :n_out]


def spectral_projector(tail, gap_tol: float = DEFAULT_GAP_TOL) -> np.ndarray:
    """Projector onto the stable subspace of ``tail`` along the unstable one."""
    stable, unstable = invariant_subspaces(tail, gap_tol)
    dim = stable.shape[0]
    basis = np.hstack([stable, unstable])
    sel = np.zeros((dim, dim))
    k = stable.shape[1]
    sel[:k, :k] = np.eye(k)
    return basis @ sel @ np.linalg.inv(basis)


def compute_projector_plus(seq: OperatorSequence, gap_tol: float = DEFAULT_GAP_TOL) -> np.ndarray:
    """Dichotomy projector ``P`` on the nonnegative semi-axis, anchored at 0."""
    tail_proj = spectral_projector(seq.tail_plus, gap_tol)
    hi = seq.window_hi
    return seq.evolution(0, hi) @ tail_proj @ seq.evolution(hi, 0)


def compute_projector_minus(seq: OperatorSequence, gap_tol: float = DEFAULT_GAP_TOL) -> np.ndarray:
    """Dichotomy projector ``Q`` on the nonpositive semi-axis, anchored at 0.

    ``range(Q)`` is the transported stable subspace of ``tail_minus`` and
    ``range(I - Q)`` the set of initial values with bounded backward orbits.
    """
    tail_proj = spectral_projector(seq.tail_minus, gap_tol)
    lo = seq.window_lo
    return seq.evolution(0, lo) @ tail_proj @ seq.evolution(lo, 0)


def spectral_rate(tail, gap_tol: float = DEFAULT_GAP_TOL) -> float:
    """Worst contraction factor of the tail: max of ``|mu|`` (stable) and ``1/|mu|`` (unstable)."""
    eigs = np.linalg.eigvals(np.asarray(tail, dtype=float))
    _check_gap(eigs, gap_tol)
    rates = [abs(mu) if abs(mu) < 1 else 1.0 / abs(mu) for mu in eigs]
    return float(max(rates))


class AxisSplitting:
    """Transported projectors and restricted kernels for one semi-axis.

    Parameters
    ----------
    seq : OperatorSequence
    axis : Axis or str
    projector : array_like
        The projector at time 0 (``P`` for plus, ``Q`` for minus).
    """

    def __init__(self, seq: OperatorSequence, axis, projector):
        self.seq = seq
        self.axis = Axis(axis)
        proj = np.array(projector, dtype=float)
        if proj.shape != (seq.dim, seq.dim):
            raise ShapeMismatch(f"projector shape {proj.shape} != ({seq.dim}, {seq.dim})")
        proj.setflags(write=False)
        self.projector = proj
        self._eye = np.eye(seq.dim)

        if self.axis is Axis.PLUS:
            self._edge = seq.window_hi
            tail = seq.tail_plus
        else:
            self._edge = seq.window_lo
            tail = seq.tail_minus
        edge_proj = self._literal(self._edge)
        scale = (1.0 + np.linalg.norm(edge_proj)) * (1.0 + np.linalg.norm(tail))
        # A tail-invariant projector stays constant beyond the window.
        self._constant_tail = (
            np.linalg.norm(edge_proj @ tail - tail @ edge_proj) <= 1e-8 * scale
        )
        self._edge_proj = edge_proj
        self._proj_cache = {}
        self._fwd = {}
        self._bwd = {}
        self._lock = threading.Lock()

    def _literal(self, j):
        return self.seq.evolution(j, 0) @ self.projector @ self.seq.evolution(0, j)

    def _beyond_edge(self, j):
        if self.axis is Axis.PLUS:
            return j > self._edge
        return j < self._edge

    def projector_at(self, j: int) -> np.ndarray:
        """``U(j) P U(j)^{-1}``."""
        j = int(j)
        with self._lock:
            hit = self._proj_cache.get(j)
        if hit is not None:
            return hit
        if self._beyond_edge(j):
            if self._constant_tail:
                val = self._edge_proj
            else:
                e = self._edge
                val = self.seq.evolution(j, e) @ self._edge_proj @ self.seq.evolution(e, j)
        else:
            val = self._literal(j)
        val = np.array(val)
        val.setflags(write=False)
        with self._lock:
            self._proj_cache[j] = val
        return val

    def complement_at(self, j: int) -> np.ndarray:
        return self._eye - self.projector_at(j)

    def forward(self, n: int, m: int) -> np.ndarray:
        """``U(n) P U(m)^{-1}`` for ``n >= m``."""
        n, m = int(n), int(m)
        if n < m:
            raise ValueError(f"forward kernel needs n >= m, got n={n}, m={m}")
        key = (n, m)
        with self._lock:
            hit = self._fwd.get(key)
            if hit is None:
                j = max((a for (a, b) in self._fwd if b == m and a <= n), default=None)
                cur = self._fwd[(j, m)] if j is not None else None
        if hit is not None:
            return hit
        if cur is None:
            j, cur = m, self.projector_at(m)
        while j < n:
            cur = self.projector_at(j + 1) @ (self.seq.operator_at(j) @ cur)
            j += 1
            cur.setflags(write=False)
            with self._lock:
                self._fwd[(j, m)] = cur
        with self._lock:
            self._fwd[key] = cur
        return cur

    def backward(self, n: int, m: int) -> np.ndarray:
        """``U(n) (I - P) U(m)^{-1}`` for ``n <= m``."""
        n, m = int(n), int(m)
        if n > m:
            raise ValueError(f"backward kernel needs n <= m, got n={n}, m={m}")
        key = (n, m)
        with self._lock:
            hit = self._bwd.get(key)
            if hit is None:
                j = min((a for (a, b) in self._bwd if b == m and a >= n), default=None)
                cur = self._bwd[(j, m)] if j is not None else None
        if hit is not None:
            return hit
        if cur is None:
            j, cur = m, self.complement_at(m)
        while j > n:
            cur = self.complement_at(j - 1) @ (self.seq.inverse_at(j - 1) @ cur)
            j -= 1
            cur.setflags(write=False)
            with self._lock:
                self._bwd[(j, m)] = cur
        with self._lock:
            self._bwd[key] = cur
        return cur


@dataclass(frozen=True)
class DichotomyCertificate:
    """Projector and constants ``(k, lambda)`` for one semi-axis."""

    axis: Axis
    projector: np.ndarray
    k: float
    lam: float
    verified_window: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        proj = np.array(self.projector, dtype=float)
        proj.setflags(write=False)
        object.__setattr__(self, "projector", proj)
        if not self.k >= 1.0:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")

    def idempotency_defect(self) -> float:
        p = self.projector
        return float(np.linalg.norm(p @ p - p, 2))


@dataclass(frozen=True)
class VerificationReport:
    axis: Axis
    window: Tuple[int, int]
    max_ratio: float
    verified: bool
    k_fit: float
    lambda_fit: float
    worst_pair: Optional[Tuple[int, int]] = None


def _axis_window_ok(axis, window):
    lo, hi = window
    if lo > hi:
        raise WrongAxis(f"empty window {window}")
    if axis is Axis.PLUS and lo < 0:
        raise WrongAxis(f"window {window} is not inside the nonnegative semi-axis")
    if axis is Axis.MINUS and hi > 0:
        raise WrongAxis(f"window {window} is not inside the nonpositive semi-axis")


def kernel_norms(splitting: AxisSplitting, window):
    """Yield ``(n, m, gap, norm)`` for both dichotomy inequalities on ``window``.

    ``gap`` is the exponent of lambda: ``n - m`` for the projector kernel,
    ``m - n`` for the complementary one.
    """
    lo, hi = window
    for m in range(lo, hi + 1):
        for n in range(lo, hi + 1):
            if n >= m:
                yield n, m, n - m, float(np.linalg.norm(splitting.forward(n, m), 2))
            if n <= m:
                yield n, m, m - n, float(np.linalg.norm(splitting.backward(n, m), 2))


def verify_dichotomy(seq: OperatorSequence, cert: DichotomyCertificate, window,
                     tol: float = 1e-12) -> VerificationReport:
    """Check both dichotomy inequalities for all ordered pairs in ``window``.

    ``max_ratio`` is the largest ``||kernel|| / (k * lam**gap)``; the
    certificate is verified when it does not exceed ``1 + tol``.  The fitted
    constants are the tightest ones the sampled window supports:
    ``lambda_fit = max ||kernel||**(1/gap)`` over ``gap > 0`` and
    ``k_fit = max ||kernel|| / lambda_fit**gap``.
    """
    window = (int(window[0]), int(window[1]))
    _axis_window_ok(cert.axis, window)
    split = AxisSplitting(seq, cert.axis, cert.projector)
    samples = list(kernel_norms(split, window))

    max_ratio, worst = 0.0, None
    for n, m, gap, nrm in samples:
        ratio = nrm / (cert.k * cert.lam ** gap)
        if ratio > max_ratio:
            max_ratio, worst = ratio, (n, m)

    lam_fit = 0.0
    for n, m, gap, nrm in samples:
        if gap > 0 and nrm > 0.0:
            lam_fit = max(lam_fit, nrm ** (1.0 / gap))
    k_fit = 0.0
    for n, m, gap, nrm in samples:
        if gap == 0:
            k_fit = max(k_fit, nrm)
        elif nrm > 0.0:
            k_fit = max(k_fit, nrm / lam_fit ** gap)

    return VerificationReport(
        axis=cert.axis,
        window=window,
        max_ratio=max_ratio,
        verified=max_ratio <= 1.0 + tol,
        k_fit=k_fit,
        lambda_fit=lam_fit,
        worst_pair=worst,
    )


def certify(seq: OperatorSequence, axis, window, gap_tol: float = DEFAULT_GAP_TOL) -> DichotomyCertificate:
    """Build a dichotomy certificate for ``axis`` valid on ``window``.

    ``lam`` is the spectral contraction rate of the corresponding tail and
    ``k`` the smallest constant (at least 1) that makes the inequalities hold
    on ``window`` with that rate.
    """
    axis = Axis(axis)
    window = (int(window[0]), int(window[1]))
    _axis_window_ok(axis, window)
    if axis is Axis.PLUS:
        proj = compute_projector_plus(seq, gap_tol)
        lam = spectral_rate(seq.tail_plus, gap_tol)
    else:
        proj = compute_projector_minus(seq, gap_tol)
        lam = spectral_rate(seq.tail_minus, gap_tol)
    split = AxisSplitting(seq, axis, proj)
    k = 1.0
    for _, _, gap, nrm in kernel_norms(split, window):
        k = max(k, nrm / lam ** gap)
    return DichotomyCertificate(axis, proj, k, lam, window)
