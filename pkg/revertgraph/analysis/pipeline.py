'''Three-strategy experiment pipeline.

* Strategy 1: representation -> resample the training split -> classifier.
* Strategy 2: representation -> anomaly detector fitted and scored on the test split.
* Strategy 3: resample training nodes in the graph itself -> GCN.

Every strategy splits first, fits its scalers on training rows only and
checks that no test node reaches a training structure.
'''
import math
import datetime
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import simplejson
from sklearn.preprocessing import StandardScaler

from revertgraph import setup_logging
from revertgraph.codegraph import CodeGraph
from revertgraph.errors import RevertGraphError, ConfigError
from revertgraph.history import FeatureMatrix, LabelSet
from revertgraph.load_settings import settings
from revertgraph.analysis.metrics import auc_roc, macro_f1, confusion_counts
from revertgraph.processing.embed import (as_array, concat_representation, node2vec_embed,
                                          gae_embed, gcn_train)
from revertgraph.processing.balance import RESAMPLERS, DUPLICATE, upsample, downsample, \
    graph_smote
from revertgraph.processing.classify import TRAINERS, train_classifier
from revertgraph.processing.detect import (AnomalyScores, threshold, lof_scores,
                                           isolation_forest_scores, ocsvm_scores,
                                           dominant_scores)
from revertgraph.utils.numeric import make_rng
from revertgraph.utils.utils import config_hash

log = setup_logging.get_logger('rg.pipeline')

STRATEGIES = (1, 2, 3)
REPRESENTATIONS = ('raw', 'node2vec', 'node2vec+raw', 'gae', 'gae+raw')
STRATEGY1_RESAMPLERS = ('none', 'up', 'down', 'smote')
STRATEGY3_MODES = ('none', 'upsample', 'downsample', 'graphsmote')
CLASSIFIERS = tuple(sorted(TRAINERS))
DETECTORS = ('lof', 'iforest', 'ocsvm', 'dominant')
GNN_MODELS = ('gcn',)
# Resampler names accepted in configs, mapped to the Strategy 3 mode they select.
MODE_ALIASES = {'none': 'none', 'up': 'upsample', 'upsample': 'upsample',
                'down': 'downsample', 'downsample': 'downsample', 'graphsmote': 'graphsmote'}
ALL_RESAMPLERS = tuple(sorted(set(STRATEGY1_RESAMPLERS) | set(MODE_ALIASES)))


class PipelineError(RevertGraphError):
    pass


def _utc_now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


class ExperimentReport(object):
    '''Outcome of one experiment: metrics on the test split plus provenance'''
    FIELDS = ('strategy', 'representation', 'model', 'resampler', 'seed', 'auc_roc',
              'macro_f1', 'confusion', 'n_train', 'n_test', 'config_hash')

    def __init__(self, strategy, representation, model, resampler, seed, auc_roc, macro_f1,
                 confusion, n_train, n_test, config_hash, started_at=None, finished_at=None):
        self.strategy = strategy
        self.representation = representation
        self.model = model
        self.resampler = resampler
        self.seed = seed
        self.auc_roc = auc_roc
        self.macro_f1 = macro_f1
        self.confusion = confusion
        self.n_train = n_train
        self.n_test = n_test
        self.config_hash = config_hash
        self.started_at = started_at
        self.finished_at = finished_at

        if not (0 <= auc_roc <= 1 and 0 <= macro_f1 <= 1):
            raise PipelineError('metrics out of range: auc {0}, f1 {1}'.format(auc_roc, macro_f1))
        if sum(confusion.values()) != n_test:
            raise PipelineError('confusion counts do not sum to the test size')

    def to_dict(self, timestamps=True):
        data = OrderedDict((field, getattr(self, field)) for field in self.FIELDS)
        if timestamps:
            data['started_at'] = self.started_at
            data['finished_at'] = self.finished_at
        return data

    def to_json(self, timestamps=True):
        return simplejson.dumps(self.to_dict(timestamps), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(**dict((k, data[k]) for k in cls.FIELDS + ('started_at', 'finished_at')
                              if k in data))
        except TypeError as e:
            raise PipelineError('malformed report: {0}'.format(e))

    def __repr__(self):
        return 'ExperimentReport(s{0}, {1}, {2}, {3}, seed={4}, auc={5:.4f}, f1={6:.4f})'.format(
            self.strategy, self.representation, self.model, self.resampler, self.seed,
            self.auc_roc, self.macro_f1)


def _labels(labels):
    if isinstance(labels, LabelSet):
        return labels
    return LabelSet(labels)


def stratified_split(labels, ratio=None, seed=0):
    '''Per-class random split of the known nodes

    The train part holds floor(ratio * n) nodes. Each non-majority class keeps
    floor(ratio * count) of its nodes for training, clamped so both parts get at
    least one; the majority class fills the remaining training slots.

    :returns: (sorted train ids, sorted test ids)
    '''
    labels = _labels(labels)
    ratio = settings.SPLIT_RATIO if ratio is None else ratio
    if not 0 < ratio < 1:
        raise PipelineError('split ratio must be in (0, 1), got {0}'.format(ratio))
    known = np.flatnonzero(labels.known_mask)
    y = labels.labels[known]
    n = len(known)
    if n < 5:
        raise PipelineError('need at least 5 labelled nodes to split, got {0}'.format(n))
    counts = np.bincount(y, minlength=2)
    if counts.min() < 2:
        raise PipelineError('need at least 2 samples of each class to split, got {0}'.format(
            counts.tolist()))

    majority = int(np.argmax(counts))
    n_train = {}
    for c in range(2):
        if c != majority:
            n_train[c] = int(min(max(math.floor(ratio * counts[c]), 1), counts[c] - 1))
    rest = int(math.floor(ratio * n)) - sum(n_train.values())
    n_train[majority] = int(min(max(rest, 1), counts[majority] - 1))

    rng = make_rng(seed, 'split')
    train = []
    for c in range(2):
        ids = rng.permutation(known[y == c])
        train.append(ids[:n_train[c]])
    train = np.sort(np.concatenate(train))
    test = np.setdiff1d(known, train)
    return train, test


def _check_no_leak(test_ids, used_ids, what):
    leaked = np.intersect1d(test_ids, used_ids)
    if len(leaked):
        raise PipelineError('{0} test nodes leaked into {1}'.format(len(leaked), what))


def scale_on_train(values, train_ids):
    '''Standardises all rows with a scaler fitted on the training rows only'''
    scaler = StandardScaler().fit(values[train_ids])
    return scaler.transform(values)


def _hp(hyperparameters, name):
    hyperparameters = hyperparameters or {}
    return hyperparameters.get(name, hyperparameters.get(name.lower()))


def build_representation(graph, features, representation, train_ids, seed=0,
                         hyperparameters=None):
    '''Builds the node representation, standardised on the training rows

    Raw features are standardised before they feed GAE or the "+raw" variants.
    '''
    if representation not in REPRESENTATIONS:
        raise ConfigError('unknown representation: {0}'.format(representation))
    raw = FeatureMatrix(scale_on_train(as_array(features), train_ids),
                        getattr(features, 'feature_names', None) or
                        ['x{0}'.format(k) for k in range(as_array(features).shape[1])])
    if representation == 'raw':
        return raw.values
    if representation.startswith('node2vec'):
        embedding = node2vec_embed(graph, _hp(hyperparameters, 'NODE2VEC'), seed)
    else:
        embedding = gae_embed(graph, raw, _hp(hyperparameters, 'GAE'), seed)
    parts = [raw, embedding] if representation.endswith('+raw') else [embedding]
    return scale_on_train(concat_representation(parts).values, train_ids)


def _report(strategy, representation, model, resampler, seed, test_labels, auc_scores,
            predictions, n_train, hash_value, started_at):
    return ExperimentReport(strategy, representation, model, resampler, seed,
                            auc_roc(auc_scores, test_labels),
                            macro_f1(predictions, test_labels),
                            confusion_counts(predictions, test_labels),
                            int(n_train), len(test_labels), hash_value,
                            started_at, _utc_now())


def _entry_hash(strategy, representation, model, resampler, seed, hyperparameters,
                dataset=None):
    return config_hash({'strategy': strategy, 'representation': representation,
                        'model': model, 'resampler': resampler, 'seed': seed,
                        'hyperparameters': hyperparameters or {}, 'dataset': dataset})


def run_strategy1(graph, features, labels, representation, resampler, classifier, seed=0,
                  hyperparameters=None, hash_value=None):
    '''Embed, resample the training split, classify the test split'''
    started_at = _utc_now()
    if resampler not in STRATEGY1_RESAMPLERS:
        raise ConfigError('unknown resampler: {0}'.format(resampler))
    if classifier not in CLASSIFIERS:
        raise ConfigError('unknown classifier: {0}'.format(classifier))
    labels = _labels(labels)
    y = labels.labels
    train_ids, test_ids = stratified_split(labels, seed=seed)
    rep = build_representation(graph, features, representation, train_ids, seed,
                               hyperparameters)

    x_train, y_train = rep[train_ids], y[train_ids]
    if resampler != 'none':
        smote_k = (_hp(hyperparameters, 'SMOTE') or {}).get('k')
        resampled = RESAMPLERS[resampler](x_train, y_train, seed, smote_k)
        _check_no_leak(test_ids, train_ids[resampled.original_indices()], 'the resampled set')
        x_train, y_train = resampled.features(x_train), resampled.labels

    model = train_classifier(classifier, x_train, y_train, seed,
                             _hp(hyperparameters, classifier.upper()))
    predictions = model.predict(rep[test_ids])
    label_scored = resampler == 'none' and classifier in settings.LABEL_SCORED_MODELS
    auc_scores = predictions if label_scored else model.predict_proba(rep[test_ids])
    hash_value = hash_value or _entry_hash(1, representation, classifier, resampler, seed,
                                           hyperparameters)
    return _report(1, representation, classifier, resampler, seed, y[test_ids], auc_scores,
                   predictions, len(y_train), hash_value, started_at)


def detector_scores(detector, graph, features, rep, train_ids, test_ids, seed=0,
                    hyperparameters=None):
    '''Raw anomaly scores of the test nodes'''
    if detector == 'lof':
        k = (_hp(hyperparameters, 'LOF') or {}).get('k', settings.LOF['k'])
        return lof_scores(rep[test_ids], min(k, len(test_ids) - 1)).scores
    elif detector == 'iforest':
        cfg = dict(settings.IFOREST, **(_hp(hyperparameters, 'IFOREST') or {}))
        return isolation_forest_scores(rep[test_ids], cfg['n_trees'], cfg['subsample_size'],
                                       seed).scores
    elif detector == 'ocsvm':
        cfg = dict(settings.OCSVM, **(_hp(hyperparameters, 'OCSVM') or {}))
        return ocsvm_scores(rep[test_ids], cfg['nu'], cfg['gamma'], cfg['tol'],
                            cfg['max_iter']).scores
    elif detector == 'dominant':
        # Trained on the whole (unlabelled) graph, evaluated on the test nodes.
        scaled = scale_on_train(as_array(features), train_ids)
        return dominant_scores(graph, scaled, _hp(hyperparameters, 'DOMINANT'),
                               seed).scores[test_ids]
    raise ConfigError('unknown detector: {0}'.format(detector))


def run_strategy2(graph, features, labels, representation, detector, seed=0,
                  hyperparameters=None, hash_value=None):
    '''Anomaly detection on the test split; contamination = training positive rate'''
    started_at = _utc_now()
    if detector not in DETECTORS:
        raise ConfigError('unknown detector: {0}'.format(detector))
    if detector == 'dominant' and representation != 'raw':
        raise ConfigError('dominant learns its own representation; use raw features')
    labels = _labels(labels)
    y = labels.labels
    train_ids, test_ids = stratified_split(labels, seed=seed)
    rep = build_representation(graph, features, representation, train_ids, seed,
                               hyperparameters)

    scores = detector_scores(detector, graph, features, rep, train_ids, test_ids, seed,
                             hyperparameters)
    contamination = float(y[train_ids].mean())
    predictions = threshold(AnomalyScores(scores, detector, contamination))
    hash_value = hash_value or _entry_hash(2, representation, detector, 'none', seed,
                                           hyperparameters)
    return _report(2, representation, detector, 'none', seed, y[test_ids], scores,
                   predictions, len(train_ids), hash_value, started_at)


def clone_nodes(graph, sources):
    '''Appends one clone per entry of ``sources``, copying the source's incident edges'''
    n = graph.n
    edges = list(graph.edges)
    paths = list(graph.node_paths)
    for k, source in enumerate(sources):
        clone = n + k
        paths.append('<clone:{0}:{1}>'.format(k, graph.node_paths[source]))
        edges.extend((clone, neighbour) for neighbour in graph.adjacency[source])
    return CodeGraph(paths, edges, graph.warnings)


def upsample_graph(graph, x, y, train_ids, seed=0):
    '''Clones the duplicated minority training nodes of an upsampling draw

    Clones carry the feature row, label and incident edges of their source and
    join the training mask.

    :returns: (augmented graph, features, labels, train mask, source node ids)
    '''
    resampled = upsample(LabelSet(y[train_ids]), seed)
    is_duplicate = np.array([origin == DUPLICATE for origin in resampled.origins], dtype=bool)
    sources = train_ids[resampled.indices[is_duplicate]]
    augmented = clone_nodes(graph, sources)
    train_mask = np.zeros(augmented.n, dtype=bool)
    train_mask[train_ids] = True
    train_mask[graph.n:] = True
    return (augmented, np.vstack([x, x[sources]]), np.concatenate([y, y[sources]]),
            train_mask, sources)


def run_strategy3(graph, features, labels, mode, seed=0, hyperparameters=None,
                  hash_value=None):
    '''Resample training nodes in the graph, train a GCN, score the test nodes

    * none: GCN on the original graph
    * downsample: unselected majority training nodes (and their edges) are removed
      from the training view
    * upsample: minority training nodes are cloned with their features, labels and
      incident edges
    * graphsmote: synthetic minority nodes in embedding space, see
      :func:`revertgraph.processing.balance.graph_smote`

    Except for graphsmote, test nodes are scored through the original graph.
    '''
    started_at = _utc_now()
    if mode not in STRATEGY3_MODES:
        raise ConfigError('unknown strategy 3 mode: {0}'.format(mode))
    labels = _labels(labels)
    y = labels.labels
    train_ids, test_ids = stratified_split(labels, seed=seed)
    x = scale_on_train(as_array(features), train_ids)
    gcn_cfg = _hp(hyperparameters, 'GCN')
    train_labels = LabelSet(y[train_ids])

    if mode == 'none':
        model, hidden, probs = gcn_train(graph, x, y, train_ids, gcn_cfg, seed)
        n_train = len(train_ids)
    elif mode == 'downsample':
        kept = train_ids[downsample(train_labels, seed).indices]
        _check_no_leak(test_ids, kept, 'the downsampled training nodes')
        view_nodes = np.union1d(kept, test_ids)
        view, old_ids = graph.subgraph(view_nodes)
        expected = 2 * int(np.bincount(y[train_ids], minlength=2).min()) + len(test_ids)
        if view.n != expected:
            raise PipelineError('downsampled view has {0} nodes, expected {1}'.format(
                view.n, expected))
        model = gcn_train(view, x[old_ids], y[old_ids], np.isin(old_ids, kept), gcn_cfg,
                          seed)[0]
        probs = model.predict_proba(graph, x)
        n_train = len(kept)
    elif mode == 'upsample':
        augmented, x_aug, y_aug, train_mask, sources = upsample_graph(graph, x, y, train_ids,
                                                                      seed)
        _check_no_leak(test_ids, sources, 'the upsampled set')
        model = gcn_train(augmented, x_aug, y_aug, train_mask, gcn_cfg, seed)[0]
        probs = model.predict_proba(graph, x)
        n_train = int(train_mask.sum())
    else:
        result = graph_smote(graph, x, y, train_ids, _hp(hyperparameters, 'GRAPHSMOTE'), seed)
        _check_no_leak(test_ids, np.flatnonzero(result.train_mask), 'the GraphSMOTE training set')
        probs = gcn_train(result.graph, result.features, result.labels, result.train_mask,
                          gcn_cfg, seed)[2]
        n_train = int(result.train_mask.sum())

    test_probs = probs[test_ids]
    predictions = (test_probs >= 0.5).astype(np.int64)
    label_scored = mode == 'none' and 'gcn' in settings.LABEL_SCORED_MODELS
    auc_scores = predictions if label_scored else test_probs
    hash_value = hash_value or _entry_hash(3, 'raw', 'gcn', mode, seed, hyperparameters)
    return _report(3, 'raw', 'gcn', mode, seed, y[test_ids], auc_scores, predictions,
                   n_train, hash_value, started_at)


# Experiment matrix
# -----------------

def load_config(config):
    '''Reads and validates an experiment config (path or dict)'''
    if not isinstance(config, dict):
        with open(config, 'r') as f:
            try:
                config = simplejson.load(f)
            except ValueError as e:
                raise ConfigError('{0}: invalid JSON ({1})'.format(f.name, e))
    if not isinstance(config, dict):
        raise ConfigError('experiment config must be a JSON object')
    config = dict(config)
    config.setdefault('strategies', [])
    config.setdefault('representations', ['raw'])
    config.setdefault('models', [])
    config.setdefault('resamplers', ['none'])
    config.setdefault('seeds', [0])
    config.setdefault('hyperparameters', {})
    if 'dataset' not in config:
        raise ConfigError('experiment config needs a "dataset" section')

    for strategy in config['strategies']:
        if strategy not in STRATEGIES:
            raise ConfigError('unknown strategy: {0!r}'.format(strategy))
    for representation in config['representations']:
        if representation not in REPRESENTATIONS:
            raise ConfigError('unknown representation: {0!r}'.format(representation))
    for model in config['models']:
        if model not in CLASSIFIERS + DETECTORS + GNN_MODELS:
            raise ConfigError('unknown model: {0!r}'.format(model))
    for resampler in config['resamplers']:
        if resampler not in ALL_RESAMPLERS:
            raise ConfigError('unknown resampler: {0!r}'.format(resampler))
    for seed in config['seeds']:
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError('seeds must be non-negative integers, got {0!r}'.format(seed))
    return config


def _candidates(config):
    for strategy in config['strategies']:
        for representation in config['representations']:
            if strategy == 3:
                for resampler in config['resamplers']:
                    yield strategy, representation, 'gcn', resampler
                continue
            for model in config['models']:
                for resampler in config['resamplers']:
                    yield strategy, representation, model, resampler


def _skip_reason(strategy, representation, model, resampler):
    if strategy == 1:
        if model not in CLASSIFIERS:
            return '{0} is not a strategy 1 classifier'.format(model)
        if resampler not in STRATEGY1_RESAMPLERS:
            return '{0} is not a strategy 1 resampler'.format(resampler)
    elif strategy == 2:
        if model not in DETECTORS:
            return '{0} is not an anomaly detector'.format(model)
        if resampler != 'none':
            return 'anomaly detection does not resample'
        if model == 'dominant' and representation != 'raw':
            return 'dominant learns its own representation from raw features'
    else:
        if representation != 'raw':
            return 'strategy 3 trains a GCN on raw features, not {0}'.format(representation)
        if resampler not in MODE_ALIASES:
            return '{0} has no graph-level counterpart in strategy 3'.format(resampler)
    return None


def plan_matrix(config):
    '''Expands a config into unique runnable entries plus skipped entries with reasons

    :returns: (entries, skipped), both lists of dicts in plan order
    '''
    config = load_config(config)
    entries, skipped = [], []
    seen = set()
    for strategy, representation, model, resampler in _candidates(config):
        reason = _skip_reason(strategy, representation, model, resampler)
        if reason:
            row = OrderedDict([('strategy', strategy), ('representation', representation),
                               ('model', model), ('resampler', resampler), ('reason', reason)])
            if row not in skipped:
                skipped.append(row)
            continue
        if strategy == 3:
            resampler = MODE_ALIASES[resampler]
        for seed in config['seeds']:
            hash_value = _entry_hash(strategy, representation, model, resampler, seed,
                                     config['hyperparameters'], config['dataset'])
            if hash_value in seen:
                continue
            seen.add(hash_value)
            entries.append(OrderedDict([
                ('strategy', strategy), ('representation', representation), ('model', model),
                ('resampler', resampler), ('seed', seed), ('config_hash', hash_value)]))
    for row in skipped:
        log.warning('skipping strategy {strategy} / {representation} / {model} / {resampler}: '
                    '{reason}'.format(**row))
    return entries, skipped


def run_entry(entry, dataset, hyperparameters=None):
    '''Runs one planned entry on a :class:`revertgraph.dataset.RevertDataset`'''
    args = (dataset.graph, dataset.features, dataset.labels)
    kwargs = {'seed': entry['seed'], 'hyperparameters': hyperparameters,
              'hash_value': entry.get('config_hash')}
    if entry['strategy'] == 1:
        return run_strategy1(*args, representation=entry['representation'],
                             resampler=entry['resampler'], classifier=entry['model'], **kwargs)
    elif entry['strategy'] == 2:
        return run_strategy2(*args, representation=entry['representation'],
                             detector=entry['model'], **kwargs)
    return run_strategy3(*args, mode=entry['resampler'], **kwargs)


def _run_entry_job(job):
    from revertgraph.dataset import load_dataset
    entry, dataset_spec, hyperparameters = job
    return run_entry(entry, load_dataset(dataset_spec, entry['seed']), hyperparameters)


def run_matrix(config, output_dir=None, jobs=1):
    '''Runs every planned entry; returns reports in plan order

    When ``output_dir`` is given, writes reports.jsonl, skipped.jsonl and the
    rendered AUC / macro F1 tables there.
    '''
    from revertgraph.dataset import load_dataset
    from revertgraph.analysis.report_table import write_tables
    from revertgraph.results import ReportStore

    config = load_config(config)
    entries, skipped = plan_matrix(config)
    log.info('running {0} experiments ({1} skipped)'.format(len(entries), len(skipped)))
    jobs_list = [(entry, config['dataset'], config['hyperparameters']) for entry in entries]

    if jobs > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            reports = list(executor.map(_run_entry_job, jobs_list))
    else:
        reports = []
        for entry, dataset_spec, hyperparameters in jobs_list:
            dataset = load_dataset(dataset_spec, entry['seed'])
            reports.append(run_entry(entry, dataset, hyperparameters))
            log.info('{0!r}'.format(reports[-1]))

    if output_dir is not None:
        store = ReportStore(output_dir)
        store.clear()
        for report in reports:
            store.add_report(report)
        store.write_skipped(skipped)
        write_tables(reports, output_dir)
    return reports
