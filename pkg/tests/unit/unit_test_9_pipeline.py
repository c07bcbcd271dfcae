import numpy as np
import pytest

from revertgraph.analysis.pipeline import (ExperimentReport, PipelineError, build_representation,
                                           clone_nodes, load_config, plan_matrix, run_strategy1,
                                           run_strategy2, run_strategy3, stratified_split,
                                           upsample_graph)
from revertgraph.codegraph import CodeGraph
from revertgraph.dataset import load_dataset
from revertgraph.errors import ConfigError
from revertgraph.history import LabelSet
from revertgraph.utils.numeric import make_rng

SYNTH = {'synth': {'n_nodes': 150, 'positive_rate': 0.1}}
SMALL = {'GCN': {'epochs': 30}, 'GRAPHSMOTE': {'encoder_epochs': 20, 'edge_epochs': 20},
         'DOMINANT': {'epochs': 20}, 'NODE2VEC': {'walks_per_node': 2, 'walk_length': 8}}


def imbalanced_labels(negatives=96, positives=4):
    return LabelSet(np.concatenate([np.zeros(negatives, dtype=np.int64),
                                    np.ones(positives, dtype=np.int64)]))


def report(**kwargs):
    values = dict(strategy=1, representation='raw', model='logreg', resampler='none', seed=0,
                  auc_roc=0.75, macro_f1=0.6, confusion={'tn': 8, 'fp': 1, 'fn': 0, 'tp': 1},
                  n_train=40, n_test=10, config_hash='0123456789abcdef')
    values.update(kwargs)
    return ExperimentReport(**values)


class TestStratifiedSplit:
    def test_1_class_counts(self):
        train, test = stratified_split(imbalanced_labels(), 0.8, seed=0)
        y = imbalanced_labels().labels
        assert np.bincount(y[train]).tolist() == [77, 3]
        assert np.bincount(y[test]).tolist() == [19, 1]

    def test_2_disjoint_and_complete(self):
        train, test = stratified_split(imbalanced_labels(), seed=3)
        assert len(np.intersect1d(train, test)) == 0
        assert np.union1d(train, test).tolist() == list(range(100))

    def test_3_unknown_nodes_excluded(self):
        labels = imbalanced_labels(16, 4).with_known(list(range(4, 20)))
        train, test = stratified_split(labels, seed=0)
        assert np.union1d(train, test).tolist() == list(range(4, 20))

    def test_4_seed_dependent_and_reproducible(self):
        first = stratified_split(imbalanced_labels(), seed=0)[0]
        assert np.array_equal(first, stratified_split(imbalanced_labels(), seed=0)[0])
        assert not np.array_equal(first, stratified_split(imbalanced_labels(), seed=1)[0])

    def test_5_too_few_positives(self):
        with pytest.raises(PipelineError):
            stratified_split(imbalanced_labels(20, 1))

    def test_6_bad_ratio(self):
        with pytest.raises(PipelineError):
            stratified_split(imbalanced_labels(), ratio=1.0)


class TestExperimentReport:
    def test_1_round_trip(self):
        original = report()
        assert ExperimentReport.from_dict(original.to_dict()).to_json() == original.to_json()

    def test_2_metric_out_of_range(self):
        with pytest.raises(PipelineError):
            report(auc_roc=1.2)

    def test_3_confusion_must_sum_to_test_size(self):
        with pytest.raises(PipelineError):
            report(n_test=11)


class TestLoadConfig:
    def test_1_defaults(self):
        config = load_config({'dataset': SYNTH, 'strategies': [1], 'models': ['logreg']})
        assert config['seeds'] == [0]
        assert config['representations'] == ['raw']

    def test_2_missing_dataset(self):
        with pytest.raises(ConfigError):
            load_config({'strategies': [1]})

    def test_3_unknown_values(self):
        for key, value in (('models', ['perceptron']), ('strategies', [4]),
                           ('representations', ['deepwalk']), ('seeds', [True]),
                           ('resamplers', ['tomek'])):
            with pytest.raises(ConfigError):
                load_config({'dataset': SYNTH, key: value})

    def test_4_invalid_json(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text('{"dataset": ')
        with pytest.raises(ConfigError, match='invalid JSON'):
            load_config(str(path))


class TestPlanMatrix:
    def test_1_skips_with_reasons(self):
        entries, skipped = plan_matrix({
            'dataset': SYNTH, 'strategies': [1, 2], 'models': ['logreg', 'lof'],
            'resamplers': ['none', 'smote'], 'seeds': [0, 1]})
        combos = [(e['strategy'], e['model'], e['resampler']) for e in entries]
        assert combos == [(1, 'logreg', 'none')] * 2 + [(1, 'logreg', 'smote')] * 2 + \
            [(2, 'lof', 'none')] * 2
        assert [e['seed'] for e in entries] == [0, 1, 0, 1, 0, 1]
        assert len(skipped) == 5
        assert all(row['reason'] for row in skipped)

    def test_2_aliases_collapse(self):
        entries, skipped = plan_matrix({'dataset': SYNTH, 'strategies': [3],
                                        'resamplers': ['up', 'upsample', 'graphsmote']})
        assert [e['resampler'] for e in entries] == ['upsample', 'graphsmote']
        assert skipped == []

    def test_3_strategy3_needs_raw_features(self):
        entries, skipped = plan_matrix({'dataset': SYNTH, 'strategies': [3],
                                        'representations': ['gae'], 'resamplers': ['smote']})
        assert entries == []
        assert len(skipped) == 1

    def test_4_hashes_unique_and_stable(self):
        config = {'dataset': SYNTH, 'strategies': [1], 'models': ['logreg', 'random_forest'],
                  'seeds': [0, 1, 2]}
        hashes = [e['config_hash'] for e in plan_matrix(config)[0]]
        assert len(set(hashes)) == 6
        assert hashes == [e['config_hash'] for e in plan_matrix(config)[0]]


class TestCloneNodes:
    def test_1_clone_copies_incident_edges(self):
        graph = CodeGraph(['a.py', 'b.py', 'c.py'], [(0, 1), (1, 2)])
        cloned = clone_nodes(graph, [1])
        assert cloned.n == 4
        assert cloned.edges == ((0, 1), (0, 3), (1, 2), (2, 3))

    def test_2_upsampled_clones_keep_source_labels(self):
        graph = CodeGraph(['m{0:02d}.py'.format(i) for i in range(20)],
                          [(i, (i + 1) % 20) for i in range(20)])
        x = np.arange(40.0).reshape(20, 2)
        y = np.zeros(20, dtype=np.int64)
        y[[3, 11, 17]] = 1
        train_ids = np.arange(1, 20)
        augmented, x_aug, y_aug, mask, sources = upsample_graph(graph, x, y, train_ids, seed=0)

        assert len(sources) == 13
        assert augmented.n == 33
        assert y_aug[20:].tolist() == y[sources].tolist() == [1] * 13
        assert np.array_equal(x_aug[20:], x[sources])
        for k, source in enumerate(sources):
            assert augmented.adjacency[20 + k] == graph.adjacency[source]
        assert not mask[0] and mask[20:].all()
        assert np.bincount(y_aug[mask]).tolist() == [16, 16]


class TestStrategies:
    def setup_method(self):
        self.dataset = load_dataset(SYNTH, seed=0)

    def check(self, result, strategy):
        assert result.strategy == strategy
        assert 0 <= result.auc_roc <= 1 and 0 <= result.macro_f1 <= 1
        assert result.n_test == 30
        assert sum(result.confusion.values()) == 30

    def test_1_representation_scaled_on_train(self):
        train, test = stratified_split(self.dataset.labels, seed=0)
        rep = build_representation(self.dataset.graph, self.dataset.features, 'node2vec+raw',
                                   train, 0, SMALL)
        assert rep.shape == (150, 8 + 16)
        assert np.allclose(rep[train].mean(axis=0), 0.0, atol=1e-9)

    @pytest.mark.parametrize('resampler', ['none', 'up', 'down', 'smote'])
    def test_2_strategy1(self, resampler):
        result = run_strategy1(self.dataset.graph, self.dataset.features, self.dataset.labels,
                               'raw', resampler, 'logreg', seed=0, hyperparameters=SMALL)
        self.check(result, 1)
        assert result.resampler == resampler

    def test_3_strategy1_reproducible(self):
        args = (self.dataset.graph, self.dataset.features, self.dataset.labels, 'raw', 'smote',
                'random_forest')
        first = run_strategy1(*args, seed=2, hyperparameters={'RANDOM_FOREST': {'n_trees': 10}})
        second = run_strategy1(*args, seed=2, hyperparameters={'RANDOM_FOREST': {'n_trees': 10}})
        assert first.to_json(timestamps=False) == second.to_json(timestamps=False)

    @pytest.mark.parametrize('detector', ['lof', 'iforest', 'ocsvm', 'dominant'])
    def test_4_strategy2(self, detector):
        result = run_strategy2(self.dataset.graph, self.dataset.features, self.dataset.labels,
                               'raw', detector, seed=0, hyperparameters=SMALL)
        self.check(result, 2)

    def test_5_dominant_needs_raw(self):
        with pytest.raises(ConfigError):
            run_strategy2(self.dataset.graph, self.dataset.features, self.dataset.labels,
                          'node2vec', 'dominant')

    @pytest.mark.parametrize('mode', ['none', 'upsample', 'downsample', 'graphsmote'])
    def test_6_strategy3(self, mode):
        result = run_strategy3(self.dataset.graph, self.dataset.features, self.dataset.labels,
                               mode, seed=0, hyperparameters=SMALL)
        self.check(result, 3)
        assert result.model == 'gcn'


class TestPlantedOutliers:
    def setup_method(self):
        rng = make_rng(5)
        x = rng.standard_normal((200, 8))
        outliers = np.arange(0, 200, 10)
        directions = rng.standard_normal((len(outliers), 8))
        x[outliers] = 8 * directions / np.linalg.norm(directions, axis=1)[:, None]
        y = np.zeros(200, dtype=np.int64)
        y[outliers] = 1
        self.graph = CodeGraph(['m{0:03d}.py'.format(i) for i in range(200)],
                               [(i, i + 1) for i in range(199)])
        self.x, self.labels = x, LabelSet(y)

    @pytest.mark.parametrize('seed', [0, 1, 2])
    def test_1_lof_finds_planted_outliers(self, seed):
        result = run_strategy2(self.graph, self.x, self.labels, 'raw', 'lof', seed=seed)
        assert result.auc_roc > 0.9
        assert result.confusion['tp'] + result.confusion['fp'] == 4
