import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dichobound.errors import NotIdempotent, ShapeMismatch
from dichobound.genpinv import (
    build_D,
    check_commutation,
    classify,
    moore_penrose_defects,
    pseudo_inverse,
    verify_involution,
)
from dichobound.green import build_context

from systems import random_system

S3_P = np.eye(2)
S3_Q = np.diag([1.0, 0.0])
# oblique projector onto span(1, 1) along e_2
OBLIQUE = np.array([[1.0, 0.0], [1.0, 0.0]])
# orthogonal projector onto span(1, 1)
DIAGONAL_LINE = np.full((2, 2), 0.5)


def test_build_D_examples():
    np.testing.assert_array_equal(build_D(np.diag([1.0, 0.0]), np.diag([1.0, 0.0])), np.diag([1.0, -1.0]))
    np.testing.assert_array_equal(build_D([[0.0]], [[1.0]]), [[0.0]])
    np.testing.assert_array_equal(build_D(np.eye(3), np.eye(3)), np.eye(3))


def test_build_D_errors():
    with pytest.raises(ShapeMismatch):
        build_D(np.eye(2), np.eye(3))
    with pytest.raises(NotIdempotent):
        build_D(2 * np.eye(2), np.eye(2))


def test_pinv_invertible():
    gi = pseudo_inverse(np.diag([1.0, -1.0]))
    np.testing.assert_allclose(gi.d_pinv, np.diag([1.0, -1.0]), atol=1e-15)
    np.testing.assert_allclose(gi.proj_ker, np.zeros((2, 2)), atol=1e-15)
    np.testing.assert_allclose(gi.proj_coker, np.zeros((2, 2)), atol=1e-15)
    assert gi.rank == 2


def test_pinv_zero():
    gi = pseudo_inverse([[0.0]])
    assert gi.d_pinv[0, 0] == 0.0
    assert gi.proj_ker[0, 0] == 1.0 and gi.proj_coker[0, 0] == 1.0
    assert gi.rank == 0


def test_pinv_rounding_level_matrix_is_zero():
    gi = pseudo_inverse([[2e-16]])
    assert gi.rank == 0


def test_pinv_rank_one():
    gi = pseudo_inverse(np.diag([1.0, 0.0]))
    np.testing.assert_allclose(gi.d_pinv, np.diag([1.0, 0.0]), atol=1e-15)
    np.testing.assert_allclose(gi.proj_ker, np.diag([0.0, 1.0]), atol=1e-15)
    np.testing.assert_allclose(gi.proj_coker, np.diag([0.0, 1.0]), atol=1e-15)


def low_rank(draw_seed, n, k):
    rng = np.random.default_rng(draw_seed)
    return rng.standard_normal((n, k)) @ rng.standard_normal((k, n))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.data())
def test_moore_penrose_identities(seed, n, data):
    k = data.draw(st.integers(0, n))
    M = low_rank(seed, n, k) if k else np.zeros((n, n))
    gi = pseudo_inverse(M)
    assert gi.rank == k
    for defect in moore_penrose_defects(gi):
        assert defect <= 1e-10
    I = np.eye(n)
    np.testing.assert_allclose(gi.proj_ker, I - gi.d_pinv @ M, atol=1e-10)
    np.testing.assert_allclose(gi.proj_coker, I - M @ gi.d_pinv, atol=1e-10)
    for proj in (gi.proj_ker, gi.proj_coker):
        np.testing.assert_allclose(proj @ proj, proj, atol=1e-10)
        np.testing.assert_allclose(proj, proj.T, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(-10, 10, allow_nan=False)))
def test_pinv_matches_numpy(M):
    gi = pseudo_inverse(M)
    s = gi.singular_values
    if gi.rank and np.any(np.abs(s[:gi.rank] - gi.rank_tol) < 1e-6 * max(1.0, s[0])):
        return  # threshold sits on a singular value; both answers are defensible
    np.testing.assert_allclose(gi.d_pinv, np.linalg.pinv(M, rcond=gi.rank_tol / max(s[0], 1e-300)),
                               atol=1e-8 * (1 + np.abs(gi.d_pinv).max()))


def classify_pq(P, Q):
    return classify(pseudo_inverse(build_D(P, Q)), P, Q)


def test_classify_saddle():
    c = classify_pq(np.diag([1.0, 0.0]), np.diag([1.0, 0.0]))
    assert (c.dim_ker, c.dim_coker, c.r, c.d, c.index) == (0, 0, 0, 0, 0)
    assert c.dichotomy_on_z and c.trichotomy


def test_classify_resonant():
    c = classify_pq(np.zeros((1, 1)), np.ones((1, 1)))
    assert (c.dim_ker, c.dim_coker, c.r, c.d) == (1, 1, 0, 1)
    assert not c.trichotomy


def test_classify_trichotomy():
    c = classify_pq(S3_P, S3_Q)
    assert (c.dim_ker, c.dim_coker, c.r, c.d) == (1, 1, 1, 0)
    assert c.trichotomy and not c.dichotomy_on_z


def test_commutation_examples():
    rep = check_commutation(S3_P, S3_Q)
    assert rep.commutator_norm == 0.0 and rep.pq_eq_q and not rep.pq_eq_p
    rep = check_commutation(np.diag([1.0, 0.0]), np.diag([1.0, 0.0]))
    assert rep.commutator_norm == 0.0 and rep.pq_eq_q and rep.pq_eq_p
    rep = check_commutation(np.diag([1.0, 0.0]), OBLIQUE)
    assert rep.commutator_norm == pytest.approx(1.0)
    with pytest.raises(ShapeMismatch):
        check_commutation(np.eye(2), np.eye(3))


def test_involution_examples():
    assert verify_involution(np.diag([1.0, -1.0])) == 0.0
    assert verify_involution([[0.0]]) == 0.0
    D = build_D(np.diag([1.0, 0.0]), DIAGONAL_LINE)
    # D^2 = I/2, so D^3 - D = -D/2
    assert verify_involution(D) == pytest.approx(0.5 * np.linalg.norm(D, 2))


def test_oblique_noncommuting_pair_is_still_involutive():
    # [P, Q] != 0 here, yet D^2 = I: the identity D^3 = D does not need commutation
    D = build_D(np.diag([1.0, 0.0]), OBLIQUE)
    assert check_commutation(np.diag([1.0, 0.0]), OBLIQUE).commutator_norm > 0
    assert verify_involution(D) == pytest.approx(0.0, abs=1e-15)


def commuting_pair(rng, dim, orthogonal):
    if orthogonal:
        B = np.linalg.qr(rng.standard_normal((dim, dim)))[0]
    else:
        B = rng.standard_normal((dim, dim)) + 2 * np.eye(dim)
    p = rng.integers(0, 2, dim).astype(float)
    q = rng.integers(0, 2, dim).astype(float)
    Binv = np.linalg.inv(B)
    return B @ np.diag(p) @ Binv, B @ np.diag(q) @ Binv


@pytest.mark.parametrize("seed", range(20))
def test_commuting_projectors(seed):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(1, 7))
    P, Q = commuting_pair(rng, dim, orthogonal=False)
    D = build_D(P, Q)
    assert verify_involution(D) <= 1e-10 * (1 + np.linalg.norm(D, 2)) ** 3
    P, Q = commuting_pair(rng, dim, orthogonal=True)
    D = build_D(P, Q)
    gi = pseudo_inverse(D)
    assert np.linalg.norm(gi.d_pinv - D, 2) <= 1e-10 * (1 + np.linalg.norm(D, 2))


@pytest.mark.parametrize("seed", range(15))
def test_proof_identities_and_bookkeeping(seed):
    rng = np.random.default_rng(300 + seed)
    ctx = build_context(random_system(rng))
    P, Q, gi = ctx.P, ctx.Q, ctx.gi
    I = np.eye(ctx.dim)
    assert np.linalg.norm(P @ gi.proj_ker - (I - Q) @ gi.proj_ker) <= 1e-10
    assert np.linalg.norm(gi.proj_coker @ Q - gi.proj_coker @ (I - P)) <= 1e-10
    c = ctx.classification
    assert c.r <= c.dim_ker and c.d <= c.dim_coker and c.index == 0
