import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dichobound.errors import InversionFailure, RangeTooShort, ShapeMismatch
from dichobound.linsys import (
    ForcingSequence,
    OperatorSequence,
    StateSequence,
    apply_L,
    dynamics_residual,
    evolution,
    operator_at,
    u_inv,
    u_of,
)

from systems import random_tail, s1, s2


def mild_system(seed=0):
    """Moduli in [0.7, 0.9] and [1.1, 1.4] keep 16-step products well scaled."""
    rng = np.random.default_rng(seed)
    dim = 3
    O = np.linalg.qr(rng.standard_normal((dim, dim)))[0]
    tail_p = O @ np.diag([0.8, 1.2, -1.3]) @ O.T
    tail_m = O.T @ np.diag([0.75, -0.9, 1.35]) @ O
    mats = {n: np.eye(dim) + 0.1 * rng.standard_normal((dim, dim)) for n in range(-3, 2)}
    return OperatorSequence(tail_m, tail_p, mats, -3, 2)


def test_operator_at_constant_family():
    seq = s1()
    for n in (-100, -1, 0, 7):
        np.testing.assert_array_equal(operator_at(seq, n), np.diag([0.5, 2.0]))


@pytest.mark.parametrize("n, expected", [(5, 2.0), (-3, 0.5), (0, 2.0), (-1, 0.5)])
def test_operator_at_tails(n, expected):
    assert operator_at(s2(), n)[0, 0] == expected


def test_operator_at_window():
    seq = OperatorSequence([[0.5]], [[2.0]], {-1: [[3.0]], 0: [[4.0]]}, -1, 1)
    assert seq.operator_at(-2)[0, 0] == 0.5
    assert seq.operator_at(-1)[0, 0] == 3.0
    assert seq.operator_at(0)[0, 0] == 4.0
    assert seq.operator_at(1)[0, 0] == 2.0


def test_evolution_identity_on_diagonal():
    np.testing.assert_array_equal(evolution(mild_system(), 7, 7), np.eye(3))


def test_evolution_examples():
    np.testing.assert_allclose(evolution(s1(), 2, 0), np.diag([0.25, 4.0]), atol=1e-15)
    assert u_of(s2(), -2)[0, 0] == pytest.approx(4.0, abs=1e-15)
    assert u_of(s2(), 3)[0, 0] == pytest.approx(8.0, abs=1e-15)
    assert u_inv(s2(), 3)[0, 0] == pytest.approx(0.125, abs=1e-15)
    np.testing.assert_array_equal(u_of(s1(), 0), np.eye(2))


def test_one_step_is_A_n():
    seq = mild_system()
    for n in range(-6, 6):
        np.testing.assert_array_equal(seq.evolution(n + 1, n), seq.operator_at(n))


def test_u_matches_evolution():
    seq = mild_system()
    for n in range(-8, 9):
        np.testing.assert_allclose(seq.u_of(n), seq.evolution(n, 0), rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(seq.u_inv(n) @ seq.u_of(n), np.eye(3), atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(-8, 8), st.integers(-8, 8), st.integers(-8, 8))
def test_cocycle(m, n, k):
    seq = mild_system()
    lhs = seq.evolution(m, n) @ seq.evolution(n, k)
    rhs = seq.evolution(m, k)
    assert np.linalg.norm(lhs - rhs, 2) <= 1e-10 * np.linalg.norm(rhs, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(-8, 8), st.integers(-8, 8))
def test_inverse_consistency(m, n):
    seq = mild_system()
    prod = seq.evolution(m, n) @ seq.evolution(n, m)
    cond = np.linalg.cond(seq.evolution(m, n))
    assert np.linalg.norm(prod - np.eye(3), 2) <= 1e-10 * cond


def test_sup_norm():
    seq = OperatorSequence([[0.5]], [[2.0]], {0: [[-3.0]]}, 0, 1)
    assert seq.sup_norm() == 3.0


def test_singular_matrix_rejected():
    with pytest.raises(InversionFailure):
        OperatorSequence(np.diag([1.0, 0.0]), np.eye(2))
    with pytest.raises(InversionFailure):
        OperatorSequence(np.eye(2), np.eye(2), {0: np.zeros((2, 2))}, 0, 1)


def test_window_must_be_complete():
    with pytest.raises(ShapeMismatch):
        OperatorSequence([[0.5]], [[2.0]], {0: [[1.0]]}, 0, 2)
    with pytest.raises(ShapeMismatch):
        OperatorSequence([[0.5]], [[2.0]], {}, 1, 2)
    with pytest.raises(ShapeMismatch):
        OperatorSequence([[0.5]], np.eye(2))


def test_apply_L_zero_and_homogeneous():
    seq = s1()
    zero = StateSequence(-2, np.zeros((5, 2)))
    np.testing.assert_array_equal(apply_L(seq, zero).values, np.zeros((4, 2)))

    x = StateSequence(0, np.array([[0.5 ** n, 0.0] for n in range(4)]))
    lx = apply_L(seq, x)
    assert list(lx.indices) == [0, 1, 2]
    np.testing.assert_array_equal(lx.values, np.zeros((3, 2)))


def test_apply_L_needs_two_samples():
    with pytest.raises(RangeTooShort):
        apply_L(s1(), StateSequence(0, np.zeros((1, 2))))


def test_forcing_sequence():
    h = ForcingSequence(2, {3: [0.0, 0.0], -1: [3.0, 4.0]})
    assert h.support == [-1]
    assert h.sup_norm() == 5.0
    np.testing.assert_array_equal(h(10), np.zeros(2))
    with pytest.raises(ShapeMismatch):
        ForcingSequence(2, {0: [1.0]})


def test_dynamics_residual_skip():
    seq = s1()
    x = StateSequence(-1, np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.0]]))
    h = ForcingSequence(2, {})
    assert dynamics_residual(seq, x, h) == 1.0
    assert dynamics_residual(seq, x, h, skip={-1}) == 0.0


def test_random_tail_spectrum():
    rng = np.random.default_rng(5)
    t = random_tail(rng, 4, 2)
    mods = np.sort(np.abs(np.linalg.eigvals(t)))
    assert np.all(mods[:2] < 0.8 + 1e-12) and np.all(mods[2:] > 1.25 - 1e-12)
