from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from conftest import barbell_graph, weighted
from ringtrace.walks import (
    AliasTable,
    WalkConfig,
    generate_walks,
    read_walks,
    serialize_walks,
    transition_weights,
    walk_rng,
    write_walks,
)


def _tv_distance(samples: np.ndarray, probs: np.ndarray) -> float:
    counts = np.bincount(samples, minlength=len(probs)) / len(samples)
    return 0.5 * float(np.abs(counts - probs).sum())


class TestAliasTable:
    def test_one_one_two(self):
        table = AliasTable(np.array([1.0, 1.0, 2.0]))
        rng = np.random.default_rng(11)
        samples = table.sample_many(rng, 1_000_000)
        assert _tv_distance(samples, np.array([0.25, 0.25, 0.5])) < 0.005

    def test_single_outcome(self):
        table = AliasTable(np.array([5.0]))
        rng = np.random.default_rng(0)
        assert all(table.sample(rng) == 0 for _ in range(50))

    @pytest.mark.parametrize("weights", [[], [1.0, 0.0], [1.0, -2.0], [np.inf, 1.0]])
    def test_invalid_weights(self, weights):
        with pytest.raises(ValueError):
            AliasTable(np.array(weights, dtype=float))

    def test_fidelity_random_vectors(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            k = int(rng.integers(2, 17))
            weights = rng.random(k) + 0.05
            table = AliasTable(weights)
            samples = table.sample_many(np.random.default_rng(int(rng.integers(2**32))), 1_000_000)
            assert _tv_distance(samples, weights / weights.sum()) < 0.005

    def test_scalar_and_vector_sampling_agree(self):
        table = AliasTable(np.array([3.0, 1.0, 2.0, 4.0]))
        scalar = [table.sample(np.random.default_rng(99)) for _ in range(1)]
        vector = table.sample_many(np.random.default_rng(99), 1)
        assert scalar[0] == int(vector[0])


class TestTransitionWeights:
    def test_path_graph_bias(self):
        # t(0) - v(1) - w(2); standing at v having come from t.
        g = weighted(3, {(0, 1): 1.0, (1, 2): 1.0})
        cfg = WalkConfig(p=1.0, q=0.5)
        w = transition_weights(g, prev=0, curr=1, cfg=cfg)
        np.testing.assert_allclose(w / w.sum(), [1 / 3, 2 / 3])

    def test_triangle_all_distance_one(self):
        g = weighted(3, {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 1.0})
        cfg = WalkConfig(p=1.0, q=0.5)
        w = transition_weights(g, prev=0, curr=1, cfg=cfg)
        np.testing.assert_allclose(w / w.sum(), [0.5, 0.5])

    def test_p_q_one_reduces_to_edge_weights(self):
        g = weighted(4, {(0, 1): 2.0, (1, 2): 5.0, (1, 3): 3.0})
        w = transition_weights(g, prev=0, curr=1, cfg=WalkConfig(p=1.0, q=1.0))
        np.testing.assert_allclose(w, [2.0, 5.0, 3.0])

    def test_return_parameter(self):
        g = weighted(3, {(0, 1): 1.0, (1, 2): 1.0})
        w = transition_weights(g, prev=0, curr=1, cfg=WalkConfig(p=4.0, q=1.0))
        np.testing.assert_allclose(w, [0.25, 1.0])

    def test_errors(self):
        g = weighted(3, {(0, 1): 1.0})
        with pytest.raises(ValueError, match="no neighbors"):
            transition_weights(g, 0, 2, WalkConfig())
        with pytest.raises(ValueError, match="not a neighbor"):
            transition_weights(g, 2, 0, WalkConfig())


class TestWalkConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"p": 0.0},
            {"q": -1.0},
            {"walk_length": 1},
            {"walks_per_node": 0},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            WalkConfig(**kwargs)


class TestGenerateWalks:
    def test_two_node_alternation(self):
        g = weighted(2, {(0, 1): 1.0})
        corpus = generate_walks(g, WalkConfig(walk_length=4, walks_per_node=3, seed=1))
        assert len(corpus.walks) == 6
        for walk in corpus.walks:
            assert walk in ([0, 1, 0, 1], [1, 0, 1, 0])

    def test_isolated_node_absent(self):
        g = weighted(3, {(0, 1): 1.0})
        corpus = generate_walks(g, WalkConfig(walk_length=5, walks_per_node=2, seed=2))
        starts = {walk[0] for walk in corpus.walks}
        assert starts == {0, 1}
        assert all(2 not in walk for walk in corpus.walks)

    def test_walks_per_node_and_length(self):
        g = barbell_graph()
        cfg = WalkConfig(walk_length=12, walks_per_node=4, seed=3)
        corpus = generate_walks(g, cfg)
        assert len(corpus.walks) == 10 * 4
        assert all(len(walk) == 12 for walk in corpus.walks)

    def test_every_step_is_an_edge(self):
        g = barbell_graph()
        corpus = generate_walks(g, WalkConfig(walk_length=20, walks_per_node=3, seed=4))
        for walk in corpus.walks:
            for u, v in zip(walk, walk[1:]):
                assert g.has_edge(u, v)

    def test_reproducible(self):
        g = barbell_graph()
        cfg = WalkConfig(walk_length=30, walks_per_node=5, seed=17)
        assert generate_walks(g, cfg).walks == generate_walks(g, cfg).walks
        other = WalkConfig(walk_length=30, walks_per_node=5, seed=18)
        assert generate_walks(g, cfg).walks != generate_walks(g, other).walks

    def test_precomputed_and_on_the_fly_identical(self):
        g = barbell_graph()
        eager = WalkConfig(walk_length=25, walks_per_node=4, seed=9)
        lazy = WalkConfig(
            walk_length=25, walks_per_node=4, seed=9, precompute_budget=0
        )
        assert generate_walks(g, eager).walks == generate_walks(g, lazy).walks

    def test_first_step_follows_edge_weights(self):
        g = weighted(3, {(0, 1): 9.0, (0, 2): 1.0})
        cfg = WalkConfig(walk_length=2, walks_per_node=2000, seed=10)
        corpus = generate_walks(g, cfg)
        first = [walk[1] for walk in corpus.walks if walk[0] == 0]
        share_heavy = sum(1 for node in first if node == 1) / len(first)
        assert abs(share_heavy - 0.9) < 0.03

    def test_barbell_bridge_crossings_are_rare(self):
        g = barbell_graph()
        corpus = generate_walks(g, WalkConfig(seed=5))
        crossings = within = 0
        for walk in corpus.walks:
            for u, v in zip(walk, walk[1:]):
                if {u, v} == {4, 5}:
                    crossings += 1
                else:
                    within += 1
        assert 0 < crossings < within

    def test_corpus_file_round_trip(self, tmp_path):
        g = barbell_graph()
        corpus = generate_walks(g, WalkConfig(walk_length=6, walks_per_node=2, seed=8))
        path = tmp_path / "walks.txt"
        write_walks(path, corpus)
        assert read_walks(path).walks == corpus.walks
        line = serialize_walks(corpus).splitlines()[0]
        assert line == " ".join(map(str, corpus.walks[0]))


class TestSecondOrderStatistics:
    def test_path_graph_empirical_frequencies(self):
        g = weighted(3, {(0, 1): 1.0, (1, 2): 1.0})
        table = AliasTable(transition_weights(g, 0, 1, WalkConfig(p=1.0, q=0.5)))
        samples = table.sample_many(np.random.default_rng(123), 100_000)
        freq_back = float(np.mean(samples == 0))
        assert abs(freq_back - 1 / 3) < 0.01
        assert abs((1 - freq_back) - 2 / 3) < 0.01

    def test_p_q_one_matches_first_order_chi_square(self):
        rng = np.random.default_rng(42)
        pairs = {}
        for u in range(10):
            for v in range(u + 1, 10):
                if rng.random() < 0.5:
                    pairs[(u, v)] = float(rng.integers(1, 10))
        g = weighted(10, pairs)
        curr = max(range(10), key=g.degree)
        prev = int(g.neighbors(curr)[0])
        table = AliasTable(transition_weights(g, prev, curr, WalkConfig(p=1.0, q=1.0)))
        n_draws = 100_000
        samples = table.sample_many(np.random.default_rng(7), n_draws)
        observed = np.bincount(samples, minlength=g.degree(curr))
        expected = g.edge_weights(curr) / g.edge_weights(curr).sum() * n_draws
        chi2 = float(((observed - expected) ** 2 / expected).sum())
        critical = stats.chi2.ppf(0.99, df=g.degree(curr) - 1)
        assert chi2 < critical


def test_walk_rng_streams_are_independent():
    a = walk_rng(1, 0, 0).random(4)
    b = walk_rng(1, 0, 1).random(4)
    c = walk_rng(1, 0, 0).random(4)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, c)
