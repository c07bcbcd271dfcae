import itertools

import numpy as np
import pytest

from revertgraph.codegraph import CodeGraph
from revertgraph.processing.balance import (DUPLICATE, ORIGINAL, SYNTHETIC, BalanceError,
                                            downsample, graph_smote, minority_neighbours,
                                            smote, smote_resample, upsample)
from revertgraph.utils.numeric import make_rng

SMALL_GRAPHSMOTE = {'encoder_epochs': 20, 'edge_epochs': 20, 'hidden_dim': 4, 'k': 2}


def imbalanced_labels(negatives=96, positives=4):
    return np.concatenate([np.zeros(negatives, dtype=np.int64),
                           np.ones(positives, dtype=np.int64)])


class TestUpsample:
    def test_1_levels_classes(self):
        resampled = upsample(imbalanced_labels(), seed=0)
        assert resampled.class_counts() == (96, 96)

    def test_2_keeps_every_original(self):
        resampled = upsample(imbalanced_labels(), seed=0)
        assert resampled.original_indices().tolist() == list(range(100))
        assert resampled.origins.count(ORIGINAL) == 100
        assert resampled.origins.count(DUPLICATE) == 92

    def test_3_duplicates_are_minority(self):
        resampled = upsample(imbalanced_labels(), seed=1)
        duplicates = [i for i, o in zip(resampled.indices, resampled.origins) if o == DUPLICATE]
        assert set(duplicates) <= {96, 97, 98, 99}

    def test_4_balanced_input_unchanged(self):
        resampled = upsample(imbalanced_labels(5, 5), seed=0)
        assert resampled.class_counts() == (5, 5)
        assert sorted(resampled.indices.tolist()) == list(range(10))

    def test_5_single_class_rejected(self):
        with pytest.raises(BalanceError):
            upsample(np.zeros(10, dtype=np.int64), seed=0)


class TestDownsample:
    def test_1_levels_classes_without_duplicates(self):
        resampled = downsample(imbalanced_labels(), seed=0)
        assert resampled.class_counts() == (4, 4)
        assert len(np.unique(resampled.indices)) == 8
        assert {96, 97, 98, 99} <= set(resampled.indices.tolist())

    def test_2_seed_changes_majority_subset(self):
        first = downsample(imbalanced_labels(), seed=0).indices
        second = downsample(imbalanced_labels(), seed=1).indices
        assert not np.array_equal(first, second)

    def test_3_reproducible(self):
        assert np.array_equal(downsample(imbalanced_labels(), seed=4).indices,
                              downsample(imbalanced_labels(), seed=4).indices)


class TestSmote:
    def test_1_two_points_interpolate_on_segment(self):
        rows, provenance = smote(np.array([[0.0, 0.0], [1.0, 1.0]]), k=1, n_synthetic=2,
                                 seed=0, return_provenance=True)
        assert rows.shape == (2, 2)
        assert np.array_equal(rows[:, 0], rows[:, 1])
        # Base 0 moves towards (1, 1); base 1 towards (0, 0).
        assert rows[0, 0] == pytest.approx(provenance.weights[0], abs=1e-15)
        assert rows[1, 0] == pytest.approx(1.0 - provenance.weights[1], abs=1e-15)

    def test_2_convex_combination_of_neighbours(self):
        rng = make_rng(6)
        x = rng.standard_normal((12, 3))
        rows, provenance = smote(x, k=3, n_synthetic=40, seed=2, return_provenance=True)
        neighbours = minority_neighbours(x, 3)
        for row, base, other, weight in zip(rows, *provenance):
            assert 0.0 <= weight < 1.0
            assert other in neighbours[base]
            expected = x[base] + weight * (x[other] - x[base])
            assert np.linalg.norm(row - expected) < 1e-12

    def test_3_bases_cycle(self):
        x = make_rng(0).standard_normal((4, 2))
        rows, provenance = smote(x, k=2, n_synthetic=10, seed=0, return_provenance=True)
        assert provenance.bases.tolist() == [0, 1, 2, 3, 0, 1, 2, 3, 0, 1]

    def test_4_nothing_to_generate(self):
        rows = smote(np.eye(3), k=2, n_synthetic=0, seed=0)
        assert rows.shape == (0, 3)

    def test_5_single_minority_sample(self):
        with pytest.raises(BalanceError, match='SMOTE needs >= 2 minority samples'):
            smote(np.ones((1, 3)), k=5, n_synthetic=4, seed=0)

    def test_6_resample_levels_classes(self):
        y = imbalanced_labels(20, 3)
        x = make_rng(1).standard_normal((23, 4))
        resampled = smote_resample(x, y, seed=0, k=2)
        assert resampled.class_counts() == (20, 20)
        assert resampled.origins.count(SYNTHETIC) == 17
        features = resampled.features(x)
        assert features.shape == (40, 4)
        assert np.array_equal(features[:23], x)

    def test_7_reproducible(self):
        x = make_rng(3).standard_normal((6, 2))
        assert np.array_equal(smote(x, 3, 9, seed=5), smote(x, 3, 9, seed=5))


class TestGraphSmote:
    def setup_method(self):
        size = 10
        edges = [(i, j) for i, j in itertools.combinations(range(size), 2) if (i + j) % 3]
        edges += [(size + i, size + j) for i, j in itertools.combinations(range(size), 2)
                  if (i + j) % 3]
        edges.append((size - 1, size))
        self.graph = CodeGraph(['m{0:02d}.py'.format(i) for i in range(2 * size)], edges)
        self.labels = np.zeros(2 * size, dtype=np.int64)
        self.labels[[15, 16, 17, 18]] = 1
        rng = make_rng(8)
        self.features = np.column_stack([self.labels + 0.2 * rng.standard_normal(2 * size),
                                         rng.standard_normal(2 * size)])
        self.train = np.zeros(2 * size, dtype=bool)
        self.train[:16] = True
        self.train[[16, 17]] = True

    def test_1_synthetic_count_levels_training_classes(self):
        result = graph_smote(self.graph, self.features, self.labels, self.train,
                             SMALL_GRAPHSMOTE, seed=0)
        # Training holds 15 negatives and 3 positives.
        assert len(result.synthetic_ids) == 12
        assert result.graph.n == 32
        assert result.synthetic_ids.tolist() == list(range(20, 32))
        assert result.labels[20:].tolist() == [1] * 12
        assert result.features.values.shape[0] == 32

    def test_2_original_graph_preserved(self):
        result = graph_smote(self.graph, self.features, self.labels, self.train,
                             SMALL_GRAPHSMOTE, seed=0)
        assert result.graph.node_paths[:20] == self.graph.node_paths
        assert set(self.graph.edges) <= set(result.graph.edges)
        for i, j in set(result.graph.edges) - set(self.graph.edges):
            assert j >= 20 and i in np.flatnonzero(self.train)

    def test_3_train_mask_covers_synthetic_not_test(self):
        result = graph_smote(self.graph, self.features, self.labels, self.train,
                             SMALL_GRAPHSMOTE, seed=0)
        assert result.train_mask[20:].all()
        assert not result.train_mask[[18, 19]].any()

    def test_4_provenance_refers_to_minority_training_nodes(self):
        result = graph_smote(self.graph, self.features, self.labels, self.train,
                             SMALL_GRAPHSMOTE, seed=0)
        assert set(result.provenance.bases.tolist()) <= {15, 16, 17}
        assert set(result.provenance.neighbours.tolist()) <= {15, 16, 17}

    def test_5_reproducible(self):
        first = graph_smote(self.graph, self.features, self.labels, self.train,
                            SMALL_GRAPHSMOTE, seed=3)
        second = graph_smote(self.graph, self.features, self.labels, self.train,
                             SMALL_GRAPHSMOTE, seed=3)
        assert first.graph.edges == second.graph.edges
        assert np.array_equal(first.features.values, second.features.values)

    def test_6_needs_both_classes(self):
        with pytest.raises(BalanceError):
            graph_smote(self.graph, self.features, self.labels, np.arange(10),
                        SMALL_GRAPHSMOTE)
