'''Large randomised oracle sweeps; the unit tests run small versions of these.'''
import itertools
import math

import numpy as np
import pytest

from revertgraph.analysis.metrics import auc_roc, confusion_counts, macro_f1
from revertgraph.codegraph import build_code_graph
from revertgraph.dataset import from_synthetic
from revertgraph.processing.detect import OneClassSvm, lof_scores
from revertgraph.synth import generate_synthetic_dataset
from revertgraph.utils.numeric import make_rng

pytestmark = pytest.mark.slow


def pairwise_auc(scores, labels):
    positives = scores[labels == 1]
    negatives = scores[labels == 0]
    greater = (positives[:, None] > negatives[None, :]).sum()
    ties = (positives[:, None] == negatives[None, :]).sum()
    return (greater + 0.5 * ties) / float(len(positives) * len(negatives))


def lof_oracle(x, k):
    n = len(x)
    dist = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2))
    neighbours = []
    for i in range(n):
        others = sorted((j for j in range(n) if j != i), key=lambda j: (dist[i, j], j))
        neighbours.append(others[:k])
    k_distance = [dist[i, neighbours[i][-1]] for i in range(n)]
    lrd = [1.0 / np.mean([max(k_distance[o], dist[i, o]) for o in neighbours[i]])
           for i in range(n)]
    return np.array([np.mean([lrd[o] for o in neighbours[i]]) / lrd[i] for i in range(n)])


class TestMetricOracles:
    def test_1_thousand_random_cases(self):
        rng = make_rng(100)
        for case in range(1000):
            n = int(rng.integers(2, 51))
            labels = rng.integers(0, 2, n)
            labels[:2] = [0, 1]
            scores = np.round(rng.random(n), 2)
            predictions = rng.integers(0, 2, n)
            assert abs(auc_roc(scores, labels) - pairwise_auc(scores, labels)) < 1e-12
            counts = confusion_counts(predictions, labels)
            f1_pos = 0.0 if counts['tp'] == 0 else \
                2.0 * counts['tp'] / (2 * counts['tp'] + counts['fp'] + counts['fn'])
            f1_neg = 0.0 if counts['tn'] == 0 else \
                2.0 * counts['tn'] / (2 * counts['tn'] + counts['fp'] + counts['fn'])
            assert abs(macro_f1(predictions, labels) - 0.5 * (f1_pos + f1_neg)) < 1e-12


class TestLofOracle:
    def test_1_hundred_random_datasets(self):
        rng = make_rng(101)
        for case, k in zip(range(100), itertools.cycle((1, 3, 5))):
            n = int(rng.integers(k + 1, 65))
            x = rng.standard_normal((n, int(rng.integers(1, 5))))
            assert np.max(np.abs(lof_scores(x, k).scores - lof_oracle(x, k))) < 1e-9


class TestNuProperty:
    def test_1_twenty_gaussian_datasets(self):
        rng = make_rng(102)
        for case in range(20):
            n = int(rng.integers(30, 200))
            nu = float(rng.uniform(0.05, 0.5))
            x = rng.standard_normal((n, 3))
            model = OneClassSvm(nu=nu).fit(x)
            outliers = np.mean(model.decision_function(x) < -model.tol)
            assert outliers <= nu + 2 / math.sqrt(n)


class TestIngestionRoundTrip:
    @pytest.mark.parametrize('seed', list(range(10)))
    def test_1_planted_graph_and_labels_recovered(self, seed):
        synthetic = generate_synthetic_dataset(n_nodes=300, seed=seed)
        graph = build_code_graph(synthetic.file_map)
        assert graph.edges == synthetic.graph.edges
        assert np.array_equal(from_synthetic(synthetic).labels.labels, synthetic.labels)
