'''Datasets: a code graph, its features and its labels, loaded from a repository
and commit log or generated synthetically.'''
import os

import simplejson

from revertgraph import setup_logging
from revertgraph.codegraph import build_code_graph, load_file_map
from revertgraph.errors import ConfigError
from revertgraph.history import (HistoryError, compute_features, label_reverts, load_commit_log,
                                 load_overrides, parse_commit_log)
from revertgraph.load_settings import settings
from revertgraph.utils.utils import canonical_json

log = setup_logging.get_logger('rg.dataset')

_CACHE = {}


class RevertDataset(object):
    '''Everything an experiment needs, with nodes in graph order'''
    def __init__(self, graph, features, labels, sources=None, commits=None, cutoff_ts=None,
                 name=None):
        if not (graph.n == features.n == labels.n):
            raise ConfigError('dataset size mismatch: graph {0}, features {1}, labels {2}'.format(
                graph.n, features.n, labels.n))
        self.graph = graph
        self.features = features
        self.labels = labels
        self.sources = sources
        self.commits = commits
        self.cutoff_ts = cutoff_ts
        self.name = name

    def __repr__(self):
        negatives, positives = self.labels.class_counts()
        return '<RevertDataset {0}: {1} nodes, {2} edges, {3} positive>'.format(
            self.name, self.graph.n, len(self.graph.edges), positives)


def ingest(file_map, commits, cutoff_ts=None, overrides=None, label_since=None, exclude=(),
           name=None):
    '''Builds graph, features and labels from in-memory sources and commits

    ``cutoff_ts`` defaults to the last commit; when a cutoff is given and
    ``label_since`` is not, only reverts after the cutoff become labels.
    '''
    graph = build_code_graph(file_map, exclude)
    if cutoff_ts is None:
        if not commits:
            raise HistoryError('empty commit log and no cutoff')
        cutoff_ts = max(commit.commit_ts for commit in commits)
    elif label_since is None:
        label_since = cutoff_ts
    features = compute_features(commits, graph, file_map, cutoff_ts)
    labels = label_reverts(commits, graph.node_paths, overrides, since_ts=label_since)
    dataset = RevertDataset(graph, features, labels, file_map, commits, cutoff_ts, name)
    log.info('{0!r}'.format(dataset))
    return dataset


def load_repository(repo, commit_log, cutoff_ts=None, overrides=None, label_since=None,
                    exclude=None):
    '''Loads a dataset from a source tree (or JSON file map) and a commit log file

    :param overrides: dict path -> 0/1, or a path to a JSON file holding one
    '''
    exclude = tuple(exclude if exclude is not None else settings.EXCLUDE_GLOBS)
    file_map = load_file_map(repo, exclude, settings.SOURCE_SUFFIXES)
    if isinstance(overrides, str):
        overrides = load_overrides(overrides)
    return ingest(file_map, load_commit_log(commit_log), cutoff_ts, overrides, label_since,
                  exclude, name=os.path.basename(os.path.normpath(repo)))


def from_synthetic(synthetic):
    '''Runs a :class:`revertgraph.synth.SyntheticDataset` through the real ingestion path'''
    commits = parse_commit_log(synthetic.commit_log_text())
    return ingest(synthetic.file_map, commits, synthetic.cutoff_ts,
                  name='synth-{0}'.format(synthetic.config.seed))


def load_synthetic_dir(path):
    '''Loads a dataset written by ``SyntheticDataset.write``'''
    with open(os.path.join(path, 'synth_config.json'), 'r') as f:
        config = simplejson.load(f)
    return load_repository(os.path.join(path, 'repo'), os.path.join(path, 'commits.jsonl'),
                           cutoff_ts=config['cutoff_ts'], exclude=())


def load_dataset(spec, seed=0):
    '''Resolves the ``dataset`` section of an experiment config

    Accepted forms::

        {"synth": {<SynthConfig parameters>, "seed": optional}}
        {"synth_dir": "<output of the synth subcommand>"}
        {"source": {"repo": ..., "commits": ..., "cutoff_ts": ..., "label_since": ...,
                    "overrides": ..., "exclude": [...]}}

    A synthetic dataset without its own seed uses the experiment seed. Loaded
    datasets are cached per process.
    '''
    from revertgraph.synth import SynthConfig, generate_synthetic_dataset

    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError('dataset must be one of {{"synth": ...}}, {{"synth_dir": ...}}, '
                          '{{"source": ...}}, got {0!r}'.format(spec))
    kind, params = list(spec.items())[0]
    if kind == 'synth':
        params = dict(params or {})
        params.setdefault('seed', seed)
    key = canonical_json([kind, params])
    if key in _CACHE:
        return _CACHE[key]

    if kind == 'synth':
        dataset = from_synthetic(generate_synthetic_dataset(SynthConfig.from_dict(params)))
    elif kind == 'synth_dir':
        dataset = load_synthetic_dir(params)
    elif kind == 'source':
        params = dict(params)
        try:
            repo, commits = params.pop('repo'), params.pop('commits')
        except KeyError as e:
            raise ConfigError('dataset source needs {0}'.format(e))
        unknown = set(params) - set(('cutoff_ts', 'label_since', 'overrides', 'exclude'))
        if unknown:
            raise ConfigError('unknown dataset source keys: {0}'.format(
                ', '.join(sorted(unknown))))
        dataset = load_repository(repo, commits, **params)
    else:
        raise ConfigError('unknown dataset kind: {0!r}'.format(kind))
    _CACHE[key] = dataset
    return dataset
