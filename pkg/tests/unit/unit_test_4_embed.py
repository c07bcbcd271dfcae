import itertools

import numpy as np
import pytest

from revertgraph.codegraph import CodeGraph
from revertgraph.history import FeatureMatrix
from revertgraph.processing.embed import (EmbedError, Embedding, concat_representation,
                                          edge_probability, gae_embed, gcn_train,
                                          generate_walks, node2vec_embed,
                                          transition_probabilities)
from revertgraph.utils.numeric import make_rng


def make_graph(n, edges):
    return CodeGraph(['m{0:03d}.py'.format(i) for i in range(n)], edges)


def two_cliques(size):
    edges = [(i, j) for i, j in itertools.combinations(range(size), 2)]
    edges += [(size + i, size + j) for i, j in itertools.combinations(range(size), 2)]
    edges.append((size - 1, size))
    return make_graph(2 * size, edges)


def cosine(a, b):
    return np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))


class TestWalks:
    def test_1_transition_probabilities_sum_to_one(self):
        rng = make_rng(2)
        for trial in range(10):
            n = int(rng.integers(2, 11))
            pairs = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < 0.4]
            graph = make_graph(n, pairs)
            for p, q in ((1.0, 1.0), (0.25, 4.0), (3.0, 0.5)):
                for previous, current in itertools.product(range(n), range(n)):
                    if current not in graph.adjacency[previous]:
                        continue
                    neighbours, probs = transition_probabilities(graph, previous, current, p, q)
                    assert abs(probs.sum() - 1.0) < 1e-12

    def test_2_biased_weights(self):
        # 0 - 1 - 2 with chord 0 - 2 and a tail 1 - 3.
        graph = make_graph(4, [(0, 1), (1, 2), (0, 2), (1, 3)])
        neighbours, probs = transition_probabilities(graph, 0, 1, p=0.5, q=2.0)
        weights = dict(zip(neighbours.tolist(), probs))
        # back to 0: 1/p = 2; 2 is adjacent to 0: 1; 3 is not: 1/q = 0.5.
        assert weights[0] == pytest.approx(2 / 3.5)
        assert weights[2] == pytest.approx(1 / 3.5)
        assert weights[3] == pytest.approx(0.5 / 3.5)

    def test_3_uniform_walk_matches_first_order_oracle(self):
        graph = make_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
        walks = generate_walks(graph, {'p': 1.0, 'q': 1.0, 'walk_length': 21,
                                       'walks_per_node': 2000}, seed=5)
        steps = np.array([(a, b) for walk in walks for a, b in zip(walk, walk[1:])])
        assert len(steps) == 5 * 2000 * 20
        for node in (1, 2, 3):
            nexts = steps[steps[:, 0] == node, 1]
            empirical = np.mean(nexts == node + 1)
            assert abs(empirical - 0.5) < 0.01

    def test_4_isolated_node_walk_is_singleton(self):
        graph = make_graph(3, [(0, 1)])
        walks = generate_walks(graph, {'p': 1, 'q': 1, 'walk_length': 5, 'walks_per_node': 2}, 0)
        assert walks[4:] == [[2], [2]]

    def test_5_walks_reproducible(self):
        graph = two_cliques(4)
        cfg = {'p': 0.5, 'q': 2.0, 'walk_length': 8, 'walks_per_node': 3}
        assert generate_walks(graph, cfg, 9) == generate_walks(graph, cfg, 9)


class TestNode2Vec:
    def test_1_single_node(self):
        embedding = node2vec_embed(make_graph(1, []), seed=0)
        assert embedding.values.shape == (1, 16)
        assert np.isfinite(embedding.values).all()

    def test_2_bit_reproducible(self):
        graph = two_cliques(5)
        cfg = {'walks_per_node': 3, 'walk_length': 10}
        first = node2vec_embed(graph, cfg, seed=3)
        second = node2vec_embed(graph, cfg, seed=3)
        assert np.array_equal(first.values, second.values)

    def test_3_cliques_separate(self):
        size = 10
        values = node2vec_embed(two_cliques(size), {'epochs': 5}, seed=1).values
        intra, inter = [], []
        for i, j in itertools.combinations(range(2 * size), 2):
            same = (i < size) == (j < size)
            (intra if same else inter).append(cosine(values[i], values[j]))
        assert np.mean(intra) > np.mean(inter)

    def test_4_bad_config(self):
        with pytest.raises(EmbedError):
            node2vec_embed(make_graph(2, [(0, 1)]), {'p': 0})


class TestGcn:
    def setup_method(self):
        size = 8
        self.graph = two_cliques(size)
        rng = make_rng(4)
        self.labels = np.repeat([0, 1], size)
        self.features = np.column_stack([self.labels + 0.3 * rng.standard_normal(2 * size),
                                         rng.standard_normal(2 * size)])
        self.train = np.array([0, 1, 2, 3, 4, 8, 9, 10, 11, 12])

    def test_1_zero_features_zero_weights(self):
        model, hidden, scores = gcn_train(self.graph, np.zeros((16, 3)), self.labels, self.train,
                                          {'init': 'zeros', 'epochs': 5})
        assert np.array_equal(scores, np.full(16, 0.5))

    def test_2_loss_decreases(self):
        model, hidden, scores = gcn_train(self.graph, self.features, self.labels, self.train,
                                          {'epochs': 11}, seed=0)
        history = model.loss_history
        assert all(b < a for a, b in zip(history[:10], history[1:11]))

    def test_3_rows_sum_to_one_and_hidden_shape(self):
        model, hidden, scores = gcn_train(self.graph, self.features, self.labels, self.train,
                                          {'epochs': 20, 'hidden_dim': 6})
        probs, _ = model.forward(self.graph, self.features)
        assert np.allclose(probs.sum(axis=1), 1.0, rtol=0, atol=1e-12)
        assert hidden.values.shape == (16, 6)
        assert hidden.provenance == 'gcn_hidden'

    def test_4_learns_communities(self):
        model, hidden, scores = gcn_train(self.graph, self.features, self.labels, self.train)
        assert scores[5:8].min() < 0.5 < scores[13:16].max()
        assert scores[13:16].mean() > scores[5:8].mean()

    def test_5_single_class_mask_still_trains(self):
        model, hidden, scores = gcn_train(self.graph, self.features, self.labels, [0, 1, 2],
                                          {'epochs': 5})
        assert np.isfinite(scores).all()


class TestGae:
    def test_1_reconstruction_separates(self):
        graph = two_cliques(6)
        features = make_rng(5).standard_normal((12, 4))
        z = gae_embed(graph, features, seed=2)
        non_edges = [(i, j) for i, j in itertools.combinations(range(12), 2)
                     if not graph.has_edge(i, j)]
        on_edges = np.mean([edge_probability(z, i, j) for i, j in graph.edges])
        off_edges = np.mean([edge_probability(z, i, j) for i, j in non_edges])
        assert on_edges > off_edges

    def test_2_single_edge(self):
        z, history = gae_embed(make_graph(2, [(0, 1)]), np.ones((2, 3)), {'dim': 2, 'epochs': 30},
                               return_history=True)
        assert z.values.shape == (2, 2)
        assert np.isfinite(z.values).all()
        assert history[-1] < history[0]

    def test_3_decoder_symmetric(self):
        z = Embedding(make_rng(0).standard_normal((5, 3)), 'gae')
        for i, j in itertools.combinations(range(5), 2):
            assert edge_probability(z, i, j) == edge_probability(z, j, i)


class TestConcat:
    def test_1_shapes(self):
        raw = FeatureMatrix(np.zeros((4, 8)))
        n2v = Embedding(np.ones((4, 16)), 'node2vec')
        combined = concat_representation([raw, n2v])
        assert combined.values.shape == (4, 24)
        assert combined.feature_names[8] == 'node2vec_0'

    def test_2_single_part_identity(self):
        raw = FeatureMatrix(np.arange(16.0).reshape(2, 8))
        assert np.array_equal(concat_representation([raw]).values, raw.values)

    def test_3_row_mismatch(self):
        with pytest.raises(EmbedError):
            concat_representation([np.zeros((3, 8)), np.zeros((4, 16))])
