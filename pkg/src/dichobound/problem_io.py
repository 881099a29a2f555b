"""JSON problem and result files.

A problem file looks like::

    {
      "dim": 2,
      "window_lo": 0,
      "window_hi": 0,
      "tail_minus": [[0.5, 0.0], [0.0, 2.0]],
      "tail_plus": [[0.5, 0.0], [0.0, 2.0]],
      "matrices": {},
      "forcing": {
        "0": [1.0, 0.0]
      },
      "tolerances": {
        "rank_tol_rel": 1e-10,
        "gap_tol": 1e-08,
        "solvability_tol": 1e-08,
        "verify_tol": 1e-08
      },
      "output_window": [-10, 10]
    }

``matrices`` and ``forcing`` are keyed by the time index written as a
string.  Missing tolerance fields take their defaults, which may be
overridden through ``DICHOBOUND_<NAME>`` environment variables.  Unknown
keys are rejected.  :func:`dumps` is canonical: parsing its output and
dumping again reproduces the same bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field, fields
from typing import Dict, List, Tuple

import numpy as np

from .errors import DichoboundError, ProblemParseError
from .linsys import ForcingSequence, OperatorSequence

TOP_KEYS = (
    "dim",
    "window_lo",
    "window_hi",
    "tail_minus",
    "tail_plus",
    "matrices",
    "forcing",
    "tolerances",
    "output_window",
)
REQUIRED_KEYS = ("dim", "tail_minus", "tail_plus")


def _env_default(name, fallback):
    raw = os.environ.get(f"DICHOBOUND_{name.upper()}")
    if raw is None:
        return fallback
    try:
        val = float(raw)
    except ValueError:
        raise ProblemParseError(f"DICHOBOUND_{name.upper()}={raw!r} is not a number")
    if not math.isfinite(val) or val <= 0:
        raise ProblemParseError(f"DICHOBOUND_{name.upper()} must be positive and finite")
    return val


@dataclass(frozen=True)
class Tolerances:
    rank_tol_rel: float = 1e-10
    gap_tol: float = 1e-8
    solvability_tol: float = 1e-8
    verify_tol: float = 1e-8

    @classmethod
    def defaults(cls) -> "Tolerances":
        base = cls()
        return cls(**{f.name: _env_default(f.name, getattr(base, f.name)) for f in fields(cls)})

    @classmethod
    def from_dict(cls, raw) -> "Tolerances":
        if not isinstance(raw, dict):
            raise ProblemParseError("'tolerances' must be an object")
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ProblemParseError(f"unknown tolerance keys: {sorted(extra)}")
        vals = dict(cls.defaults().as_dict())
        for k, v in raw.items():
            vals[k] = _positive(v, f"tolerances.{k}")
        return cls(**vals)

    def as_dict(self) -> dict:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    def replace(self, **kw) -> "Tolerances":
        vals = self.as_dict()
        vals.update({k: float(v) for k, v in kw.items() if v is not None})
        return Tolerances(**vals)


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _positive(v, what):
    if not _is_number(v) or not math.isfinite(v) or v <= 0:
        raise ProblemParseError(f"{what} must be a positive finite number, got {v!r}")
    return float(v)


def _int(v, what):
    if not isinstance(v, int) or isinstance(v, bool):
        raise ProblemParseError(f"{what} must be an integer, got {v!r}")
    return v


def _matrix(v, dim, what):
    if not isinstance(v, list) or len(v) != dim:
        raise ProblemParseError(f"{what} must be a list of {dim} rows")
    rows = []
    for i, row in enumerate(v):
        if not isinstance(row, list) or len(row) != dim:
            raise ProblemParseError(f"{what}[{i}] must be a list of {dim} numbers")
        for x in row:
            if not _is_number(x) or not math.isfinite(x):
                raise ProblemParseError(f"{what}[{i}] contains a non-finite or non-numeric entry {x!r}")
        rows.append([float(x) for x in row])
    return rows


def _vector(v, dim, what):
    if not isinstance(v, list) or len(v) != dim:
        raise ProblemParseError(f"{what} must be a list of {dim} numbers")
    for x in v:
        if not _is_number(x) or not math.isfinite(x):
            raise ProblemParseError(f"{what} contains a non-finite or non-numeric entry {x!r}")
    return [float(x) for x in v]


def _index_key(k, what):
    try:
        n = int(k)
    except (TypeError, ValueError):
        raise ProblemParseError(f"{what} key {k!r} is not an integer")
    if str(n) != k:
        raise ProblemParseError(f"{what} key {k!r} is not a canonical integer")
    return n


@dataclass(frozen=True)
class ProblemFile:
    dim: int
    tail_minus: List[List[float]]
    tail_plus: List[List[float]]
    window_lo: int = 0
    window_hi: int = 0
    matrices: Dict[int, List[List[float]]] = field(default_factory=dict)
    forcing: Dict[int, List[float]] = field(default_factory=dict)
    tolerances: Tolerances = field(default_factory=Tolerances.defaults)
    output_window: Tuple[int, int] = (-10, 10)

    @classmethod
    def from_dict(cls, raw) -> "ProblemFile":
        if not isinstance(raw, dict):
            raise ProblemParseError("problem must be a JSON object")
        extra = set(raw) - set(TOP_KEYS)
        if extra:
            raise ProblemParseError(f"unknown keys: {sorted(extra)}")
        missing = [k for k in REQUIRED_KEYS if k not in raw]
        if missing:
            raise ProblemParseError(f"missing keys: {missing}")
        dim = _int(raw["dim"], "dim")
        if dim < 1:
            raise ProblemParseError("dim must be positive")
        lo = _int(raw.get("window_lo", 0), "window_lo")
        hi = _int(raw.get("window_hi", 0), "window_hi")
        mats_raw = raw.get("matrices", {})
        forcing_raw = raw.get("forcing", {})
        if not isinstance(mats_raw, dict) or not isinstance(forcing_raw, dict):
            raise ProblemParseError("'matrices' and 'forcing' must be objects keyed by index")
        mats = {
            _index_key(k, "matrices"): _matrix(v, dim, f"matrices[{k}]")
            for k, v in mats_raw.items()
        }
        forcing = {
            _index_key(k, "forcing"): _vector(v, dim, f"forcing[{k}]")
            for k, v in forcing_raw.items()
        }
        ow = raw.get("output_window", [-10, 10])
        if not isinstance(ow, list) or len(ow) != 2:
            raise ProblemParseError("output_window must be [lo, hi]")
        ow = (_int(ow[0], "output_window[0]"), _int(ow[1], "output_window[1]"))
        if ow[0] > ow[1]:
            raise ProblemParseError("output_window must satisfy lo <= hi")
        tol = Tolerances.from_dict(raw.get("tolerances", {}))
        prob = cls(
            dim=dim,
            tail_minus=_matrix(raw["tail_minus"], dim, "tail_minus"),
            tail_plus=_matrix(raw["tail_plus"], dim, "tail_plus"),
            window_lo=lo,
            window_hi=hi,
            matrices=dict(sorted(mats.items())),
            forcing=dict(sorted(forcing.items())),
            tolerances=tol,
            output_window=ow,
        )
        try:
            prob.operator_sequence()
        except DichoboundError as exc:
            raise ProblemParseError(f"invalid operator family: {exc}") from exc
        return prob

    def operator_sequence(self) -> OperatorSequence:
        return OperatorSequence(
            tail_minus=self.tail_minus,
            tail_plus=self.tail_plus,
            matrices=self.matrices,
            window_lo=self.window_lo,
            window_hi=self.window_hi,
        )

    def forcing_sequence(self) -> ForcingSequence:
        return ForcingSequence(self.dim, self.forcing)

    def as_dict(self) -> dict:
        return {
            "dim": self.dim,
            "window_lo": self.window_lo,
            "window_hi": self.window_hi,
            "tail_minus": [[float(x) for x in r] for r in self.tail_minus],
            "tail_plus": [[float(x) for x in r] for r in self.tail_plus],
            "matrices": {str(k): [[float(x) for x in r] for r in v]
                         for k, v in sorted(self.matrices.items())},
            "forcing": {str(k): [float(x) for x in v] for k, v in sorted(self.forcing.items())},
            "tolerances": self.tolerances.as_dict(),
            "output_window": [int(self.output_window[0]), int(self.output_window[1])],
        }

    def dumps(self) -> str:
        return dumps_canonical(self.as_dict())

    def sha256(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()


def _reject_constant(name):
    raise ProblemParseError(f"non-finite number {name} is not allowed")


def loads_json(text: str):
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ProblemParseError(f"invalid JSON: {exc}") from exc


def loads(text: str) -> ProblemFile:
    return ProblemFile.from_dict(loads_json(text))


def load(path) -> ProblemFile:
    return loads(read_text(path))


def read_text(path) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ProblemParseError(f"cannot read {path}: {exc}") from exc


def dumps_canonical(obj: dict) -> str:
    """Top-level keys one per line, nested objects one entry per line,
    arrays inline."""
    lines = ["{"]
    items = list(obj.items())
    for i, (k, v) in enumerate(items):
        sep = "," if i < len(items) - 1 else ""
        if isinstance(v, dict) and v:
            lines.append(f"  {json.dumps(k)}: {{")
            sub = list(v.items())
            for j, (sk, sv) in enumerate(sub):
                ssep = "," if j < len(sub) - 1 else ""
                lines.append(f"    {json.dumps(sk)}: {json.dumps(sv, allow_nan=False)}{ssep}")
            lines.append("  }" + sep)
        else:
            lines.append(f"  {json.dumps(k)}: {json.dumps(v, allow_nan=False)}{sep}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def matrix_to_list(M) -> list:
    return [[float(x) for x in row] for row in np.asarray(M)]


def write_text(path, text: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
