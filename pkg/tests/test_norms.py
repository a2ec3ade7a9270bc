import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from slopebounds.norms import (
    WeightSchedule,
    best_s_term_error_l1,
    best_s_term_error_star,
    lq_norm,
    lr_compressibility_bound,
    lr_quasinorm,
    q_ratio_sparsity,
    rearrange_desc,
    sorted_l1_norm,
    sparsity_report,
    top_s_support,
)

# zero or comfortably normal magnitudes, so rescaling never underflows
finite = st.one_of(st.just(0.0), st.floats(1e-100, 1e3), st.floats(-1e3, -1e-100))


def vectors(min_size=1, max_size=12):
    return st.integers(min_size, max_size).flatmap(lambda p: arrays(float, p, elements=finite))


@st.composite
def vector_and_weights(draw, max_size=10):
    p = draw(st.integers(1, max_size))
    v = draw(arrays(float, p, elements=finite))
    w = -np.sort(-np.abs(draw(arrays(float, p, elements=st.floats(0, 10)))))
    return v, WeightSchedule(w)


# ---- rearrangement -------------------------------------------------------

@pytest.mark.parametrize(
    "v, expected",
    [([-3, 1, -2], [3, 2, 1]), ([0, 0], [0, 0]), ([5], [5])],
)
def test_rearrange_desc_examples(v, expected):
    assert rearrange_desc(v).tolist() == expected


def test_rearrange_desc_rejects_empty():
    with pytest.raises(ValueError):
        rearrange_desc([])


@given(vectors(), st.randoms())
def test_rearrange_is_permutation_invariant_and_idempotent(v, r):
    perm = list(range(v.size))
    r.shuffle(perm)
    out = rearrange_desc(v)
    assert np.array_equal(out, rearrange_desc(v[perm]))
    assert np.array_equal(rearrange_desc(out), out)
    assert np.array_equal(np.sort(out), np.sort(np.abs(v)))


# ---- weight schedules ----------------------------------------------------

def test_weight_schedule_validation():
    with pytest.raises(ValueError):
        WeightSchedule([1.0, 2.0])
    with pytest.raises(ValueError):
        WeightSchedule([1.0, -0.5])
    with pytest.raises(ValueError):
        WeightSchedule([np.inf, 1.0])
    w = WeightSchedule([2.0, 1.0])
    with pytest.raises(ValueError):
        w.weights[0] = 5.0
    assert w == WeightSchedule([2.0, 1.0])
    assert hash(w) == hash(WeightSchedule([2.0, 1.0]))
    assert WeightSchedule.constant(3.0, 4).weights.tolist() == [3.0] * 4


# ---- sorted l1 norm ------------------------------------------------------

def test_sorted_l1_norm_examples():
    assert sorted_l1_norm([1, -2], [2, 1]) == 5
    assert sorted_l1_norm([1, -2], [3, 3]) == 9
    assert sorted_l1_norm([0, 0, 0], [5, 2, 1]) == 0


def test_sorted_l1_norm_dimension_mismatch():
    with pytest.raises(ValueError):
        sorted_l1_norm([1, 2, 3], [1, 1])


@given(vector_and_weights(), st.data())
def test_sorted_l1_is_a_norm(vw, data):
    v, w = vw
    u = data.draw(arrays(float, v.size, elements=finite))
    c = data.draw(finite)
    nv, nu = sorted_l1_norm(v, w), sorted_l1_norm(u, w)
    assert sorted_l1_norm(u + v, w) <= nu + nv + 1e-10 * (1 + nu + nv)
    assert math.isclose(sorted_l1_norm(c * v, w), abs(c) * nv, rel_tol=1e-10, abs_tol=1e-10)


@given(vector_and_weights())
def test_sorted_l1_equals_max_over_permutations(vw):
    v, w = vw
    if v.size > 6:
        v, w = v[:6], WeightSchedule(w.weights[:6])
    best = max(float(np.dot(w.weights, np.abs(v)[list(pi)])) for pi in itertools.permutations(range(v.size)))
    assert math.isclose(sorted_l1_norm(v, w), best, rel_tol=1e-12, abs_tol=1e-12)


# ---- best s-term errors --------------------------------------------------

def test_best_s_term_star_examples():
    assert best_s_term_error_star([3, 2, 1], [3, 2, 1], 1) == 8
    beta = np.array([0, 4.0, 0, -1.0])
    assert best_s_term_error_star(beta, [4, 3, 2, 1], 2) == 0
    lam = 0.7
    assert math.isclose(best_s_term_error_star([1, 1], [lam, lam], 1), lam * best_s_term_error_l1([1, 1], 1))


def test_best_s_term_star_edges():
    beta = np.array([1.0, -3.0, 2.0])
    w = [3.0, 2.0, 1.0]
    assert best_s_term_error_star(beta, w, 0) == sorted_l1_norm(beta, w)
    assert best_s_term_error_star(beta, w, 3) == 0
    with pytest.raises(ValueError):
        best_s_term_error_star(beta, w, 4)
    with pytest.raises(ValueError):
        best_s_term_error_star(beta, w, -1)


def test_best_s_term_l1_examples():
    assert best_s_term_error_l1([3, 2, 1], 1) == 3
    assert best_s_term_error_l1([-4, 0, 0], 1) == 0
    assert best_s_term_error_l1([1, 1, 1, 1], 2) == 2
    with pytest.raises(ValueError):
        best_s_term_error_l1([1, 2], 3)


def test_top_s_support_breaks_ties_by_lowest_index():
    assert sorted(top_s_support([1, 2, 2, 2], 2).tolist()) == [1, 2]


def _exhaustive_star(beta, w, s):
    p = beta.size
    best = math.inf
    for S in itertools.combinations(range(p), s):
        r = beta.copy()
        r[list(S)] = 0.0
        best = min(best, sorted_l1_norm(r, w))
    return best


@given(vector_and_weights(max_size=7), st.data())
def test_best_s_term_star_matches_support_enumeration(vw, data):
    beta, w = vw
    s = data.draw(st.integers(0, beta.size))
    got = best_s_term_error_star(beta, w, s)
    assert math.isclose(got, _exhaustive_star(beta, w, s), rel_tol=1e-12, abs_tol=1e-12)


# ---- q-ratio sparsity ----------------------------------------------------

def test_q_ratio_examples():
    assert math.isclose(q_ratio_sparsity([1, 1, 1, 0], 2), 3.0)
    assert math.isclose(q_ratio_sparsity([1, 1, 1, 0], math.inf), 3.0)
    for q in (1.5, 2, 7, math.inf):
        assert math.isclose(q_ratio_sparsity([0, 0, -2.5, 0], q), 1.0)


def test_q_ratio_rejects_zero_and_q_one():
    with pytest.raises(ValueError):
        q_ratio_sparsity([0, 0], 2)
    with pytest.raises(ValueError):
        q_ratio_sparsity([1, 0], 1)


@given(vectors(), st.sampled_from([1.5, 2.0, 3.0, math.inf]), st.floats(1e-3, 1e3), st.booleans())
def test_q_ratio_scale_invariant_and_bounded(v, q, c, neg):
    if not np.any(v):
        return
    c = -c if neg else c
    r = q_ratio_sparsity(v, q)
    assert math.isclose(q_ratio_sparsity(c * v, q), r, rel_tol=1e-9)
    assert 1 - 1e-9 <= r <= v.size * (1 + 1e-9)


# ---- l_r compressibility -------------------------------------------------

def test_lr_compressibility_examples():
    lhs, rhs = lr_compressibility_bound([1, 1], [1, 1], 1, 0.5)
    assert lhs == 1 and math.isclose(rhs, 4.0)
    lhs, rhs = lr_compressibility_bound([0, 2, 0, -1], [4, 3, 2, 1], 2, 0.3)
    assert lhs == 0 and rhs > 0


def test_lr_compressibility_uses_leading_weight():
    # a tail weighted from lambda_s onward would give 0 here
    lhs, rhs = lr_compressibility_bound([1, 1, 1], [1, 0, 0], 2, 0.5)
    assert lhs == 1 and lhs <= rhs


def test_lr_compressibility_rejects_bad_r():
    for r in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            lr_compressibility_bound([1, 1], [1, 1], 1, r)


@given(vector_and_weights(), st.floats(0.05, 0.95), st.data())
def test_lr_compressibility_holds(vw, r, data):
    beta, w = vw
    s = data.draw(st.integers(1, beta.size))
    lhs, rhs = lr_compressibility_bound(beta, w, s, r)
    assert lhs <= rhs * (1 + 1e-10) + 1e-12


@given(vectors(), st.floats(0.05, 0.95), st.data())
def test_lr_compressibility_unit_weights(beta, r, data):
    s = data.draw(st.integers(1, beta.size))
    lhs, rhs = lr_compressibility_bound(beta, np.ones(beta.size), s, r)
    assert lhs == pytest.approx(best_s_term_error_l1(beta, s), rel=1e-12, abs=1e-12)
    assert lhs <= s ** (r / (1 - r)) * lr_quasinorm(beta, r) * (1 + 1e-10) + 1e-12


# ---- lq norms and the report --------------------------------------------

def test_lq_norm_large_q_is_stable():
    v = np.array([1e200, 1e200])
    assert math.isclose(lq_norm(v, 50), 1e200 * 2 ** (1 / 50))
    assert lq_norm(v, math.inf) == 1e200


def test_sparsity_report_fields():
    beta = np.array([5.0, 0.0, -1.0, 0.5])
    w = WeightSchedule([4.0, 3.0, 2.0, 1.0])
    rep = sparsity_report(beta, w, 1)
    assert rep.s == 1
    assert math.isclose(rep.sigma_s_star, 4 * 1.0 + 3 * 0.5)
    assert math.isclose(rep.sigma_s_l1, 1.5)
    assert math.isclose(rep.q_ratio, q_ratio_sparsity(beta, 2))
    assert sparsity_report(beta, w, 3).sigma_s_star == 0
