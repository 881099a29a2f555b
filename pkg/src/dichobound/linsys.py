"""Operator families, forcing sequences and evolution operators.

The family ``A_n`` is stored as an explicit window ``[window_lo, window_hi)``
of matrices plus two constant tails.  Evolution operators are plain products
of these matrices:

    Phi(m, n) = A_{m-1} ... A_n        (m > n)
    Phi(m, m) = I
    Phi(m, n) = Phi(n, m)^{-1}         (m < n)

and ``U(n) = Phi(n, 0)``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional

import numpy as np

from .errors import InversionFailure, RangeMismatch, RangeTooShort, ShapeMismatch


def _as_square(mat, dim=None, what="matrix"):
    arr = np.array(mat, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ShapeMismatch(f"{what} must be square, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ShapeMismatch(f"{what} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatch(f"{what} has non-finite entries")
    arr.setflags(write=False)
    return arr


def _check_invertible(mat, inv_tol, what):
    s = np.linalg.svd(mat, compute_uv=False)
    if s[-1] <= inv_tol * s[0] or s[0] == 0.0:
        raise InversionFailure(
            f"{what} is numerically singular (sigma_min/sigma_max = "
            f"{s[-1] / s[0] if s[0] else 0.0:.3g})"
        )


class OperatorSequence:
    """The invertible family ``{A_n}``: a finite window plus constant tails.

    Parameters
    ----------
    tail_minus, tail_plus : array_like, shape (dim, dim)
        ``A_n`` for ``n < window_lo`` and ``n >= window_hi``.
    matrices : mapping int -> array_like, optional
        ``A_n`` for ``n`` in ``[window_lo, window_hi)``; every index of the
        window must be present.
    window_lo, window_hi : int
        Window bounds with ``window_lo <= 0 <= window_hi``.
    inv_tol : float
        Relative singular-value floor used to reject singular matrices.

    Instances are immutable.  Products are memoized behind a lock so a
    sequence can be shared between threads.
    """

    def __init__(
        self,
        tail_minus,
        tail_plus,
        matrices: Optional[Mapping[int, object]] = None,
        window_lo: int = 0,
        window_hi: int = 0,
        inv_tol: float = 1e-12,
    ):
        window_lo, window_hi = int(window_lo), int(window_hi)
        if not window_lo <= 0 <= window_hi:
            raise ShapeMismatch(
                f"window [{window_lo}, {window_hi}) must contain the origin"
            )
        self._tail_minus = _as_square(tail_minus, what="tail_minus")
        self.dim = self._tail_minus.shape[0]
        self._tail_plus = _as_square(tail_plus, self.dim, "tail_plus")
        matrices = dict(matrices or {})
        expected = set(range(window_lo, window_hi))
        keys = {int(k) for k in matrices}
        if keys != expected:
            raise ShapeMismatch(
                f"window matrices must be given exactly for n in "
                f"[{window_lo}, {window_hi}); got {sorted(keys)}"
            )
        self._matrices = {
            int(k): _as_square(v, self.dim, f"A_{k}") for k, v in matrices.items()
        }
        self.window_lo = window_lo
        self.window_hi = window_hi
        self.inv_tol = inv_tol

        _check_invertible(self._tail_minus, inv_tol, "tail_minus")
        _check_invertible(self._tail_plus, inv_tol, "tail_plus")
        for k, m in self._matrices.items():
            _check_invertible(m, inv_tol, f"A_{k}")

        self._inv = {}
        self._u = {0: np.eye(self.dim)}
        self._u_inv = {0: np.eye(self.dim)}
        self._lock = threading.Lock()

    @property
    def tail_minus(self):
        return self._tail_minus

    @property
    def tail_plus(self):
        return self._tail_plus

    @property
    def matrices(self) -> Dict[int, np.ndarray]:
        return dict(self._matrices)

    def __repr__(self):
        return (
            f"OperatorSequence(dim={self.dim}, window=[{self.window_lo}, "
            f"{self.window_hi}))"
        )

    def operator_at(self, n: int) -> np.ndarray:
        if n < self.window_lo:
            return self._tail_minus
        if n >= self.window_hi:
            return self._tail_plus
        return self._matrices[n]

    def inverse_at(self, n: int) -> np.ndarray:
        """``A_n^{-1}``; the tails share one cached inverse each."""
        if n < self.window_lo:
            key = "minus"
        elif n >= self.window_hi:
            key = "plus"
        else:
            key = n
        with self._lock:
            inv = self._inv.get(key)
        if inv is None:
            inv = np.linalg.inv(self.operator_at(n))
            inv.setflags(write=False)
            with self._lock:
                self._inv[key] = inv
        return inv

    def sup_norm(self) -> float:
        """``|||A||| = sup_n ||A_n||`` (spectral norm), exact for this model."""
        mats = [self._tail_minus, self._tail_plus, *self._matrices.values()]
        return max(float(np.linalg.norm(m, 2)) for m in mats)

    def evolution(self, m: int, n: int) -> np.ndarray:
        """The evolution operator ``Phi(m, n)``."""
        m, n = int(m), int(n)
        out = np.eye(self.dim)
        if m >= n:
            for j in range(n, m):
                out = self.operator_at(j) @ out
        else:
            # Phi(m, n) = A_m^{-1} A_{m+1}^{-1} ... A_{n-1}^{-1}
            for j in range(n - 1, m - 1, -1):
                out = self.inverse_at(j) @ out
        return out

    def u_of(self, n: int) -> np.ndarray:
        """``U(n) = Phi(n, 0)``."""
        n = int(n)
        with self._lock:
            hit = self._u.get(n)
        if hit is not None:
            return hit
        step = 1 if n > 0 else -1
        with self._lock:
            j = max((k for k in self._u if 0 <= k * step <= n * step), key=abs)
            cur = self._u[j]
        while j != n:
            if step > 0:
                cur = self.operator_at(j) @ cur
            else:
                cur = self.inverse_at(j - 1) @ cur
            j += step
            cur.setflags(write=False)
            with self._lock:
                self._u[j] = cur
        return cur

    def u_inv(self, n: int) -> np.ndarray:
        """``U(n)^{-1} = Phi(0, n)``."""
        n = int(n)
        with self._lock:
            hit = self._u_inv.get(n)
        if hit is not None:
            return hit
        step = 1 if n > 0 else -1
        with self._lock:
            j = max((k for k in self._u_inv if 0 <= k * step <= n * step), key=abs)
            cur = self._u_inv[j]
        while j != n:
            if step > 0:
                cur = cur @ self.inverse_at(j)
            else:
                cur = cur @ self.operator_at(j - 1)
            j += step
            cur.setflags(write=False)
            with self._lock:
                self._u_inv[j] = cur
        return cur


# Module-level spellings of the sequence methods.
def operator_at(seq: OperatorSequence, n: int) -> np.ndarray:
    return seq.operator_at(n)


def evolution(seq: OperatorSequence, m: int, n: int) -> np.ndarray:
    return seq.evolution(m, n)


def u_of(seq: OperatorSequence, n: int) -> np.ndarray:
    return seq.u_of(n)


def u_inv(seq: OperatorSequence, n: int) -> np.ndarray:
    return seq.u_inv(n)


@dataclass(frozen=True)
class ForcingSequence:
    """A finitely supported forcing ``h``; unlisted indices are zero."""

    dim: int
    entries: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, v in dict(self.entries).items():
            vec = np.array(v, dtype=float).reshape(-1)
            if vec.shape != (self.dim,):
                raise ShapeMismatch(f"h_{k} has shape {vec.shape}, expected ({self.dim},)")
            vec.setflags(write=False)
            clean[int(k)] = vec
        object.__setattr__(self, "entries", dict(sorted(clean.items())))

    @classmethod
    def zero(cls, dim: int) -> "ForcingSequence":
        return cls(dim, {})

    def __call__(self, n: int) -> np.ndarray:
        v = self.entries.get(int(n))
        return np.zeros(self.dim) if v is None else v

    @property
    def support(self) -> list:
        return [k for k, v in self.entries.items() if np.any(v != 0.0)]

    def sup_norm(self) -> float:
        """``|||h|||``."""
        if not self.entries:
            return 0.0
        return max(float(np.linalg.norm(v)) for v in self.entries.values())

    def items(self) -> Iterable:
        return ((k, v) for k, v in self.entries.items() if np.any(v != 0.0))


@dataclass(frozen=True)
class StateSequence:
    """Samples ``x_n`` for ``n = start, ..., start + len - 1``."""

    start: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2:
            raise ShapeMismatch("samples must be a (count, dim) array")
        vals.setflags(write=False)
        object.__setattr__(self, "start", int(self.start))
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def stop(self) -> int:
        return self.start + len(self.values)

    @property
    def indices(self) -> range:
        return range(self.start, self.stop)

    def __len__(self):
        return len(self.values)

    def __call__(self, n: int) -> np.ndarray:
        i = int(n) - self.start
        if not 0 <= i < len(self.values):
            raise RangeMismatch(f"index {n} outside [{self.start}, {self.stop})")
        return self.values[i]

    def restrict(self, lo: int, hi: int) -> "StateSequence":
        """Samples on ``[lo, hi]`` (inclusive)."""
        if lo < self.start or hi >= self.stop or hi < lo:
            raise RangeMismatch(
                f"[{lo}, {hi}] not inside [{self.start}, {self.stop - 1}]"
            )
        return StateSequence(lo, self.values[lo - self.start: hi - self.start + 1])

    def sup_norm(self) -> float:
        if len(self.values) == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.values, axis=1)))


def apply_L(seq: OperatorSequence, x: StateSequence) -> StateSequence:
    """``(Lx)(n) = x_{n+1} - A_n x_n`` on the range of ``x`` minus its last index."""
    if len(x) < 2:
        raise RangeTooShort("L needs at least two consecutive samples")
    if x.dim != seq.dim:
        raise ShapeMismatch(f"state dimension {x.dim} != operator dimension {seq.dim}")
    out = np.empty((len(x) - 1, seq.dim))
    for i, n in enumerate(range(x.start, x.stop - 1)):
        out[i] = x.values[i + 1] - seq.operator_at(n) @ x.values[i]
    return StateSequence(x.start, out)


def dynamics_residual(seq: OperatorSequence, x: StateSequence, h: ForcingSequence,
                      skip=()) -> float:
    """``max_n ||x_{n+1} - A_n x_n - h_n||`` over the range of ``x``."""
    lx = apply_L(seq, x)
    worst = 0.0
    for i, n in enumerate(lx.indices):
        if n in skip:
            continue
        worst = max(worst, float(np.linalg.norm(lx.values[i] - h(n))))
    return worst
