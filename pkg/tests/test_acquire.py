"""Acquisition function oracles and pool selection arithmetic."""

import math

import numpy as np
import pytest

from sensal.acquire import (
    PredictiveSample,
    bald,
    max_entropy,
    predict_deterministic,
    predict_mc,
    random_scores,
    select,
    variation_ratio,
)
from sensal.model import HarnetConfig, build


# Independent brute-force formula implementations (kept deliberately naive).
def entropy_ref(p):
    return -sum(pi * math.log(max(pi, 1e-12)) for pi in p)


def bald_ref(rows):
    mean = [sum(r[c] for r in rows) / len(rows) for c in range(len(rows[0]))]
    return entropy_ref(mean) - sum(entropy_ref(r) for r in rows) / len(rows)


def random_sample(rng, t, c):
    return PredictiveSample.from_passes(rng.dirichlet(np.ones(c) * rng.uniform(0.3, 3), size=t))


def small_bundle(dropout_p=0.3, seed=0):
    return build(
        HarnetConfig(input_length=16, num_classes=3, dropout_p=dropout_p), seed=seed
    )


class TestFormulas:
    def test_max_entropy_one_hot_is_zero(self):
        s = PredictiveSample.from_passes(np.array([[1.0, 0.0, 0.0]]))
        assert max_entropy(s) == pytest.approx(0.0, abs=1e-10)

    def test_max_entropy_uniform_six(self):
        s = PredictiveSample.from_passes(np.full((4, 6), 1 / 6))
        assert max_entropy(s) == pytest.approx(1.791759469228055, abs=1e-12)

    def test_max_entropy_frozen_value(self):
        # independently evaluated: -(0.7 ln 0.7 + 0.3 ln 0.3)
        s = PredictiveSample.from_passes(np.array([[0.7, 0.3]]))
        assert max_entropy(s) == pytest.approx(0.6108643020548935, abs=1e-12)

    def test_bald_identical_passes_is_zero(self):
        s = PredictiveSample.from_passes(np.tile([0.2, 0.5, 0.3], (7, 1)))
        assert bald(s) == pytest.approx(0.0, abs=1e-12)

    def test_bald_max_disagreement_is_ln2(self):
        s = PredictiveSample.from_passes(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert bald(s) == pytest.approx(math.log(2), abs=1e-10)

    def test_bald_matches_brute_force(self, rng):
        for _ in range(100):
            s = random_sample(rng, 10, 6)
            assert bald(s) == pytest.approx(bald_ref(s.per_pass.tolist()), abs=1e-10)

    def test_variation_ratio_examples(self):
        one_hot = PredictiveSample.from_passes(np.array([[0.0, 1.0]]))
        assert variation_ratio(one_hot) == 0.0
        uniform = PredictiveSample.from_passes(np.full((1, 4), 0.25))
        assert variation_ratio(uniform) == pytest.approx(0.75)
        s = PredictiveSample.from_passes(np.array([[0.5, 0.3, 0.2]]))
        assert variation_ratio(s) == pytest.approx(0.5)

    def test_bounds_over_many_samples(self, rng):
        for _ in range(1000):
            t = int(rng.integers(1, 12))
            c = int(rng.integers(2, 8))
            s = random_sample(rng, t, c)
            vr, b, h = variation_ratio(s), bald(s), max_entropy(s)
            assert 0.0 <= vr < 1.0
            assert b >= -1e-12
            assert b <= h + 1e-10
            assert h <= math.log(c) + 1e-10

    def test_mean_matches_row_average(self, rng):
        s = random_sample(rng, 10, 5)
        assert np.allclose(s.mean, s.per_pass.mean(axis=0), atol=1e-9)
        assert np.allclose(s.per_pass.sum(axis=1), 1.0, atol=1e-6)


class TestPredictMC:
    def test_zero_dropout_degenerates_to_deterministic(self, rng):
        bundle = small_bundle(dropout_p=0.0)
        x = rng.normal(size=(3, 16))
        s = predict_mc(bundle, x, t_passes=5, seed=0)
        det = predict_deterministic(bundle, x)
        for row in s.per_pass:
            assert np.array_equal(row, s.per_pass[0])
        assert np.allclose(s.mean, det, atol=1e-12)
        assert bald(s) == 0.0
        assert max_entropy(s) == pytest.approx(float(entropy_ref(det)), abs=1e-12)
        assert variation_ratio(s) == pytest.approx(1.0 - det.max(), abs=1e-12)

    def test_single_pass_mean_is_the_row(self, rng):
        bundle = small_bundle()
        x = rng.normal(size=(3, 16))
        s = predict_mc(bundle, x, t_passes=1, seed=0)
        assert np.array_equal(s.mean, s.per_pass[0])

    def test_bit_identical_replays(self, rng):
        bundle = small_bundle()
        x = rng.normal(size=(3, 16))
        a = predict_mc(bundle, x, t_passes=10, seed=42, window_id=3)
        b = predict_mc(bundle, x, t_passes=10, seed=42, window_id=3)
        assert np.array_equal(a.per_pass, b.per_pass)

    def test_passes_actually_differ_with_dropout(self, rng):
        bundle = small_bundle(dropout_p=0.5)
        x = rng.normal(size=(3, 16))
        s = predict_mc(bundle, x, t_passes=10, seed=0)
        assert not all(np.array_equal(r, s.per_pass[0]) for r in s.per_pass[1:])


class TestRandomScores:
    def test_deterministic_given_seed(self):
        assert np.array_equal(random_scores(100, seed=9), random_scores(100, seed=9))

    def test_different_seeds_differ(self):
        assert not np.array_equal(random_scores(100, seed=9), random_scores(100, seed=10))

    def test_law_of_large_numbers(self):
        assert 0.49 <= random_scores(100_000, seed=1).mean() <= 0.51


class TestSelect:
    def test_eta_half_of_123_pool_selects_62(self, rng):
        bundle = small_bundle()
        pool = rng.normal(size=(123, 3, 16))
        batch = select(pool, bundle, "varratio", eta=0.5, t_passes=2, seed=0)
        assert len(batch.selected) == 62

    def test_eta_zero_scores_but_selects_nothing(self, rng):
        bundle = small_bundle()
        pool = rng.normal(size=(10, 3, 16))
        batch = select(pool, bundle, "bald", eta=0.0, t_passes=2, seed=0)
        assert len(batch.selected) == 0
        assert len(batch.scores) == 10

    def test_eta_one_selects_permutation_of_pool(self, rng):
        bundle = small_bundle()
        pool = rng.normal(size=(11, 3, 16))
        batch = select(pool, bundle, "maxentropy", eta=1.0, t_passes=2, seed=0)
        assert sorted(batch.selected.tolist()) == list(range(11))

    def test_unknown_function_rejected(self, rng):
        bundle = small_bundle()
        with pytest.raises(ValueError, match="unknown acquisition"):
            select(rng.normal(size=(3, 3, 16)), bundle, "margin", 0.5, 2, 0)

    def test_scale_invariance_of_ranking(self, rng):
        scores = rng.random(50)
        order1 = np.lexsort((np.arange(50), -scores))
        order2 = np.lexsort((np.arange(50), -(scores * 17.3)))
        assert np.array_equal(order1, order2)

    def test_ties_break_by_pool_index(self):
        scores = np.array([0.5, 0.7, 0.5, 0.7])
        order = np.lexsort((np.arange(4), -scores))
        assert order.tolist() == [1, 3, 0, 2]

    def test_replay_and_order_independence(self, rng):
        bundle = small_bundle()
        pool = rng.normal(size=(9, 3, 16))
        a = select(pool, bundle, "varratio", 0.5, 3, seed=5)
        b = select(pool, bundle, "varratio", 0.5, 3, seed=5)
        assert np.array_equal(a.scores, b.scores)
        assert np.array_equal(a.selected, b.selected)
        # per-window streams: scoring a window alone matches its pool score
        lone = predict_mc(bundle, pool[4], 3, seed=5, window_id=4)
        assert variation_ratio(lone) == a.scores[4]
