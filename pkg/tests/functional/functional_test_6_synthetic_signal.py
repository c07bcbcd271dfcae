import numpy as np
import pytest

from revertgraph.analysis.pipeline import run_strategy1, run_strategy2
from revertgraph.dataset import load_dataset
from revertgraph.history import information_value
from revertgraph.synth import generate_synthetic_dataset

SEEDS = list(range(10))
NULL = {'n_nodes': 1000, 'positive_rate': 0.4, 'beta': [0.0] * 8, 'contagion': 0.0}
FAST = {'RANDOM_FOREST': {'n_trees': 30}}


def null_dataset(seed):
    return load_dataset({'synth': NULL}, seed)


class TestNoSignal:
    @pytest.mark.parametrize('classifier', ['logreg', 'linear_svm', 'random_forest'])
    def test_1_trained_models_score_near_chance(self, classifier):
        aucs = []
        for seed in SEEDS:
            dataset = null_dataset(seed)
            aucs.append(run_strategy1(dataset.graph, dataset.features, dataset.labels, 'raw',
                                      'smote', classifier, seed=seed,
                                      hyperparameters=FAST).auc_roc)
        assert 0.45 < np.mean(aucs) < 0.55

    def test_2_untrained_gae_scores_near_chance(self):
        aucs = []
        for seed in SEEDS:
            dataset = null_dataset(seed)
            aucs.append(run_strategy2(dataset.graph, dataset.features, dataset.labels, 'gae',
                                      'lof', seed=seed,
                                      hyperparameters={'GAE': {'epochs': 0}}).auc_roc)
        assert 0.4 < np.mean(aucs) < 0.6


class TestSignalStrength:
    def test_1_revert_frequency_iv_grows_with_its_weight(self):
        levels = []
        for weight in (0.0, 1.0, 3.0):
            values = []
            for seed in range(3):
                synthetic = generate_synthetic_dataset(n_nodes=1000, positive_rate=0.1,
                                                       beta=[weight] + [0.0] * 7,
                                                       contagion=0.0, seed=seed)
                values.append(information_value(synthetic.features.values[:, 0],
                                                synthetic.labels))
            levels.append(np.mean(values))
        assert levels[0] < levels[1] < levels[2]
