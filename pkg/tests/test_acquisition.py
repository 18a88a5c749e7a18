import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from batchbald.acquisition import (
    AcquisitionError,
    AcquisitionRequest,
    acquire,
    acquire_bald,
    acquire_batchbald,
    acquire_exhaustive,
    acquire_meanstd,
    acquire_random,
    acquire_varratios,
    meanstd_scores,
    varratios_scores,
)
from batchbald.estimators import EXACT, SAMPLED, bald_scores, batchbald_score
from batchbald.tensor_io import PosteriorTensor, random_tensor
from conftest import LN2


def req(strategy, b, **kw):
    return AcquisitionRequest(strategy, b, **kw)


def test_size_one_batchbald_is_bald():
    rng = np.random.default_rng(0)
    for _ in range(40):
        t = random_tensor(rng, int(rng.integers(1, 40)), int(rng.integers(1, 20)), int(rng.integers(2, 10)))
        a = acquire_batchbald(t, req("batchbald", 1))
        b = acquire_bald(t, req("bald", 1))
        assert a.indices == b.indices == [int(np.argmax(bald_scores(t)))]
        assert a.scores == b.scores


def test_duplicate_pool_pathology(dup_pool):
    bb = acquire_batchbald(dup_pool, req("batchbald", 2))
    assert bb.indices == [0, 2]
    assert bb.scores == pytest.approx([LN2, 2 * LN2], abs=1e-12)
    assert acquire_bald(dup_pool, req("bald", 2)).indices == [0, 1]
    # oracle: every pair, exhaustively
    pair_scores = {p: batchbald_score(dup_pool, p).score for p in itertools.combinations(range(3), 2)}
    assert max(pair_scores, key=pair_scores.get) == (0, 2)


def test_identical_soft_pool_follows_joint_entropy(soft_flip):
    # noisy copies are conditionally independent given the parameters, so later
    # copies still add a little; the gains must match exact enumeration
    t = PosteriorTensor([soft_flip] * 6)
    res = acquire_batchbald(t, req("batchbald", 4))
    gains = np.diff(res.scores)
    for n in range(1, 5):
        assert res.scores[n - 1] == pytest.approx(batchbald_score(t, range(n)).score, abs=1e-12)
    assert res.indices == [0, 1, 2, 3]
    assert np.all(gains >= -1e-9)


def test_identical_one_hot_pool_gains_vanish(flip_point):
    t = PosteriorTensor([flip_point] * 5)
    res = acquire_batchbald(t, req("batchbald", 4))
    assert res.scores[0] == pytest.approx(LN2)
    assert np.all(np.abs(np.diff(res.scores)) <= 1e-9)


class TestBALD:
    def test_sorted_top_b(self):
        pts = [np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[0.9, 0.1], [0.1, 0.9]])]
        t = PosteriorTensor(pts)
        s = bald_scores(t)
        assert s[1] > s[2] > s[0]
        assert acquire_bald(t, req("bald", 2)).indices == [1, 2]

    def test_ties_to_lowest_index(self):
        t = PosteriorTensor([[[0.3, 0.7]] * 2] * 4)
        assert acquire_bald(t, req("bald", 2)).indices == [0, 1]

    def test_b_too_large(self, dup_pool):
        with pytest.raises(AcquisitionError):
            acquire_bald(dup_pool, req("bald", 4))


class TestBaselines:
    def test_constant_rows(self):
        t = PosteriorTensor([[[0.3, 0.7]] * 3])
        assert varratios_scores(t)[0] == pytest.approx(0.3)
        assert meanstd_scores(t)[0] == pytest.approx(0.0, abs=1e-15)

    def test_flip_point(self, flip_point):
        t = PosteriorTensor([flip_point])
        # oracle: 1 - max(mean) = 1 - 0.5; population std of {1, 0} = 0.5 for both classes
        assert varratios_scores(t)[0] == pytest.approx(1 - 0.5)
        assert meanstd_scores(t)[0] == pytest.approx(math.sqrt(((1 - 0.5) ** 2 + (0 - 0.5) ** 2) / 2))

    def test_random_is_seeded(self):
        t = random_tensor(np.random.default_rng(0), 30, 4, 3)
        a = acquire_random(t, req("random", 5, seed=42))
        b = acquire_random(t, req("random", 5, seed=42))
        c = acquire_random(t, req("random", 5, seed=43))
        assert a.indices == b.indices
        assert a.indices != c.indices
        assert len(set(a.indices)) == 5

    def test_ranked_baselines(self):
        t = random_tensor(np.random.default_rng(1), 20, 6, 3)
        assert acquire_varratios(t, req("varratios", 3)).indices == list(np.argsort(-varratios_scores(t), kind="stable")[:3])
        assert acquire_meanstd(t, req("meanstd", 3)).indices == list(np.argsort(-meanstd_scores(t), kind="stable")[:3])


class TestExhaustive:
    def test_b1_is_bald_argmax(self):
        t = random_tensor(np.random.default_rng(2), 7, 4, 3)
        assert acquire_exhaustive(t, req("exhaustive", 1)).indices == [int(np.argmax(bald_scores(t)))]

    def test_duplicate_pool(self, dup_pool):
        res = acquire_exhaustive(dup_pool, req("exhaustive", 2))
        assert res.indices == [0, 2]
        assert res.scores[-1] == pytest.approx(2 * LN2)

    def test_too_large(self):
        t = random_tensor(np.random.default_rng(0), 60, 2, 2)
        with pytest.raises(AcquisitionError):
            acquire_exhaustive(t, req("exhaustive", 6))
        with pytest.raises(AcquisitionError):
            acquire_exhaustive(t, req("exhaustive", 2, exact_limit=3))


@st.composite
def greedy_instances(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    n_pool = draw(st.integers(2, 8))
    b = draw(st.integers(1, min(3, n_pool)))
    return random_tensor(rng, n_pool, draw(st.integers(1, 4)), draw(st.integers(2, 3))), b


@settings(max_examples=40, deadline=None)
@given(greedy_instances())
def test_greedy_bound(inst):
    t, b = inst
    g = acquire_batchbald(t, req("batchbald", b)).scores[-1]
    opt = acquire_exhaustive(t, req("exhaustive", b)).scores[-1]
    assert g >= (1 - 1 / math.e) * opt - 1e-9
    assert g <= opt + 1e-9


@settings(max_examples=40, deadline=None)
@given(greedy_instances())
def test_bald_sum_dominates_returned_batch(inst):
    t, b = inst
    res = acquire_batchbald(t, req("batchbald", b))
    assert bald_scores(t)[res.indices].sum() >= res.scores[-1] - 1e-9


def test_greedy_scores_non_decreasing_and_distinct():
    t = random_tensor(np.random.default_rng(5), 40, 10, 4)
    res = acquire_batchbald(t, req("batchbald", 6))
    assert len(set(res.indices)) == 6
    assert res.modes == [EXACT] * 6
    assert np.all(np.diff(res.scores) >= -1e-9)


def test_switch_to_sampled_mode():
    t = random_tensor(np.random.default_rng(6), 30, 8, 3)
    res = acquire_batchbald(t, req("batchbald", 5, exact_limit=27, m=2000, seed=1))
    assert res.modes == [EXACT, EXACT, EXACT, SAMPLED, SAMPLED]
    exact = acquire_batchbald(t, req("batchbald", 5))
    assert res.indices[:3] == exact.indices[:3]
    assert res.scores[-1] == pytest.approx(batchbald_score(t, res.indices).score, abs=0.05)


def test_deterministic_and_parallel_invariant(monkeypatch):
    from batchbald import estimators

    t = random_tensor(np.random.default_rng(7), 200, 8, 3)
    r = req("batchbald", 5, exact_limit=27, m=500, seed=3)
    a = acquire_batchbald(t, r)
    monkeypatch.setattr(estimators, "CHUNK_ELEMENTS", 1000)
    b = acquire_batchbald(t, AcquisitionRequest("batchbald", 5, 500, 27, 3, jobs=4))
    assert a.indices == b.indices
    assert a.scores == b.scores


def test_request_validation(dup_pool):
    with pytest.raises(AcquisitionError):
        acquire(dup_pool, req("nope", 1))
    with pytest.raises(AcquisitionError):
        acquire(dup_pool, req("batchbald", 0))
    with pytest.raises(AcquisitionError):
        acquire(dup_pool, req("batchbald", 1, exact_limit=1))


def test_results_document_shape(dup_pool):
    doc = acquire(dup_pool, req("batchbald", 2, seed=9)).to_document()
    assert set(doc) == {"strategy", "b", "k", "m", "seed", "exact_limit", "acquired", "scores", "step_ms"}
    assert doc["acquired"] == [0, 2] and doc["k"] == 4 and len(doc["scores"]) == 2
