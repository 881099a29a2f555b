"""Built-in example systems.

saddle
    ``A_n = diag(1/2, 2)`` for all ``n``; ``P = Q = diag(1, 0)``, so ``D`` is
    invertible and every forcing has exactly one bounded solution.
resonant
    Scalar, ``A_n = 2`` for ``n >= 0`` and ``1/2`` for ``n < 0``.  Orbits
    decay towards both ends, ``D = 0`` and one solvability condition must
    hold; the forcing ``h_0 = 1, h_1 = -2`` satisfies it.
trichotomy
    ``A_n = diag(1/2, 1/2)`` for ``n >= 0`` and ``diag(1/2, 2)`` for
    ``n < 0``; ``P = I``, ``Q = diag(1, 0)``.  Always solvable, with a
    one-parameter family of bounded solutions.
"""

from .errors import UnknownDemo
from .problem_io import ProblemFile

DEMO_NAMES = ("saddle", "resonant", "trichotomy")


def demo_problem(name: str) -> ProblemFile:
    if name == "saddle":
        tail = [[0.5, 0.0], [0.0, 2.0]]
        return ProblemFile(dim=2, tail_minus=tail, tail_plus=tail,
                           forcing={0: [1.0, 0.0]})
    if name == "resonant":
        return ProblemFile(dim=1, tail_minus=[[0.5]], tail_plus=[[2.0]],
                           forcing={0: [1.0], 1: [-2.0]})
    if name == "trichotomy":
        return ProblemFile(dim=2,
                           tail_minus=[[0.5, 0.0], [0.0, 2.0]],
                           tail_plus=[[0.5, 0.0], [0.0, 0.5]],
                           forcing={0: [1.0, 1.0]})
    raise UnknownDemo(f"unknown demo {name!r}; choose from {', '.join(DEMO_NAMES)}")
