"""The matching operator ``D = P - (I - Q)``, its pseudoinverse and the
kernel/cokernel bookkeeping that decides uniqueness and solvability.

In finite dimension ``D`` is always Fredholm with index 0; the interesting
numbers are ``r = rank(P P_ker)`` (free parameters of the bounded family) and
``d = rank(P_coker Q)`` (independent solvability conditions).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotIdempotent, ShapeMismatch

DEFAULT_RANK_TOL_REL = 1e-10


def _pair(P, Q):
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape != Q.shape:
        raise ShapeMismatch(f"projectors must be square of equal shape, got {P.shape}, {Q.shape}")
    return P, Q


def build_D(P, Q, idem_tol: float = 1e-8) -> np.ndarray:
    """``D = P - (I - Q)``; both arguments must be idempotent."""
    P, Q = _pair(P, Q)
    for name, M in (("P", P), ("Q", Q)):
        defect = np.linalg.norm(M @ M - M, 2)
        if defect > idem_tol * (1.0 + np.linalg.norm(M, 2) ** 2):
            raise NotIdempotent(f"{name} is not a projector: ||{name}^2 - {name}|| = {defect:.3g}")
    return P - (np.eye(P.shape[0]) - Q)


@dataclass(frozen=True)
class GeneralizedInverse:
    d_matrix: np.ndarray
    d_pinv: np.ndarray
    proj_ker: np.ndarray
    proj_coker: np.ndarray
    singular_values: np.ndarray
    rank: int
    rank_tol: float
    ker_basis: np.ndarray
    coker_basis: np.ndarray


def pseudo_inverse(M, rank_tol_rel: float = DEFAULT_RANK_TOL_REL) -> GeneralizedInverse:
    """Moore-Penrose pseudoinverse by truncated SVD.

    Singular values at or below ``rank_tol_rel * max(sigma_max, 1)`` count as
    zero.  The floor of 1 keeps a matrix that is zero up to rounding (as ``D``
    often is when assembled from projectors) from being read as full rank.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {M.shape}")
    U, s, Vt = np.linalg.svd(M)
    smax = float(s[0]) if s.size else 0.0
    tol = rank_tol_rel * max(smax, 1.0)
    rank = int(np.sum(s > tol))
    Ur, sr, Vr = U[:, :rank], s[:rank], Vt[:rank].T
    pinv = (Vr / sr) @ Ur.T
    ker = Vt[rank:].T
    coker = U[:, rank:]
    return GeneralizedInverse(
        d_matrix=M,
        d_pinv=pinv,
        proj_ker=ker @ ker.T,
        proj_coker=coker @ coker.T,
        singular_values=s,
        rank=rank,
        rank_tol=tol,
        ker_basis=ker,
        coker_basis=coker,
    )


def numerical_rank(M, scale: float, rank_tol_rel: float = DEFAULT_RANK_TOL_REL) -> int:
    """Rank of ``M`` counting singular values above ``rank_tol_rel * scale``."""
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    return int(np.sum(s > rank_tol_rel * max(scale, 1.0)))


def range_basis(M, scale: float, rank_tol_rel: float = DEFAULT_RANK_TOL_REL) -> np.ndarray:
    """Orthonormal basis (columns) of ``range(M)``."""
    U, s, _ = np.linalg.svd(np.asarray(M, dtype=float))
    k = int(np.sum(s > rank_tol_rel * max(scale, 1.0)))
    return U[:, :k]


@dataclass(frozen=True)
class CommutationReport:
    commutator_norm: float
    pq_eq_q: bool
    pq_eq_p: bool


def check_commutation(P, Q, tol: float = 1e-10) -> CommutationReport:
    P, Q = _pair(P, Q)
    PQ = P @ Q
    return CommutationReport(
        commutator_norm=float(np.linalg.norm(PQ - Q @ P, 2)),
        pq_eq_q=bool(np.linalg.norm(PQ - Q, 2) <= tol),
        pq_eq_p=bool(np.linalg.norm(PQ - P, 2) <= tol),
    )


@dataclass(frozen=True)
class Classification:
    dim_ker: int
    dim_coker: int
    r: int
    d: int
    index: int
    trichotomy: bool
    dichotomy_on_z: bool

    def as_dict(self) -> dict:
        return {
            "dim_ker": self.dim_ker,
            "dim_coker": self.dim_coker,
            "r": self.r,
            "d": self.d,
            "index": self.index,
            "trichotomy": self.trichotomy,
            "dichotomy_on_z": self.dichotomy_on_z,
        }


def classify(gi: GeneralizedInverse, P, Q, tol: float = 1e-10) -> Classification:
    """Dimension bookkeeping for the bounded-solution problem.

    ``tol`` governs the commutation flags and scales with ``1 + ||P|| ||Q||``.
    """
    P, Q = _pair(P, Q)
    dim = P.shape[0]
    rank_tol_rel = gi.rank_tol / max(float(gi.singular_values[0]), 1.0)
    r = numerical_rank(P @ gi.proj_ker, np.linalg.norm(P, 2), rank_tol_rel)
    d = numerical_rank(gi.proj_coker @ Q, np.linalg.norm(Q, 2), rank_tol_rel)
    comm = check_commutation(P, Q, tol * (1.0 + np.linalg.norm(P, 2) * np.linalg.norm(Q, 2)))
    commuting = comm.commutator_norm <= tol * (1.0 + np.linalg.norm(P, 2) * np.linalg.norm(Q, 2))
    dim_ker = dim - gi.rank
    dim_coker = dim - gi.rank
    return Classification(
        dim_ker=dim_ker,
        dim_coker=dim_coker,
        r=r,
        d=d,
        index=dim_ker - dim_coker,
        trichotomy=bool(commuting and comm.pq_eq_q),
        dichotomy_on_z=bool(commuting and comm.pq_eq_q and comm.pq_eq_p),
    )


def verify_involution(D) -> float:
    """``||D^3 - D||``; zero whenever ``P`` and ``Q`` commute."""
    D = np.asarray(D, dtype=float)
    return float(np.linalg.norm(D @ D @ D - D, 2))


def moore_penrose_defects(gi: GeneralizedInverse) -> tuple:
    """Relative defects of the four Moore-Penrose identities."""
    D, X = gi.d_matrix, gi.d_pinv
    nd = 1.0 + np.linalg.norm(D, 2)
    nx = 1.0 + np.linalg.norm(X, 2)
    DX, XD = D @ X, X @ D
    return (
        float(np.linalg.norm(D @ X @ D - D, 2) / nd),
        float(np.linalg.norm(X @ D @ X - X, 2) / nx),
        float(np.linalg.norm(DX - DX.T, 2)),
        float(np.linalg.norm(XD - XD.T, 2)),
    )
