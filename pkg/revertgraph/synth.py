'''Synthetic repositories with planted revert labels.

A generated dataset is a set of Python source files whose imports realise a
community-structured preferential-attachment graph, plus a JSON-lines commit
log. History before the cutoff drives the features; revert events after the
cutoff encode the planted labels, so the default ingestion path
(``dataset.from_synthetic``, which labels from the cutoff on) recovers them
exactly. Everything flows through the real parsers.

Labels follow a latent risk model::

    logit_i = b + signal_scale * sum_k beta_k * s_ik + contagion * f_i

where s_ik is the standardised log1p of feature k as computed from the
generated log, f_i the fraction of i's neighbours carrying a planted revert in
the 30 days before the cutoff, and the intercept b is found by bisection so
the positive rate hits the target. Those pre-cutoff reverts only feed
``revert_freq_30d``; they are not labels.
'''
import os
import math
from collections import OrderedDict

import numpy as np
import simplejson

from revertgraph import setup_logging
from revertgraph.codegraph import CodeGraph, module_name
from revertgraph.errors import RevertGraphError
from revertgraph.history import (CommitRecord, FileChange, FEATURE_NAMES, compute_features,
                                 write_commit_log)
from revertgraph.load_settings import settings
from revertgraph.utils.numeric import make_rng, sigmoid
from revertgraph.utils.utils import ensure_dir

log = setup_logging.get_logger('rg.synth')

T0 = 1600000000
DAY = 86400
HOUR = 3600
HISTORY_DAYS = 180
WINDOW_DAYS = 30
DEVELOPERS_PER_COMMUNITY = 12
MAX_BISECTIONS = 100


class SynthError(RevertGraphError):
    '''Generation failure; ``achieved_rate`` is set when the bisection misses its target'''
    def __init__(self, message, achieved_rate=None):
        super(SynthError, self).__init__(message)
        self.achieved_rate = achieved_rate


class SynthConfig(object):
    '''Generator parameters; unset values come from ``settings.SYNTH``'''
    FIELDS = ('n_nodes', 'attachment', 'n_communities', 'mixing', 'positive_rate', 'beta',
              'signal_scale', 'contagion')

    def __init__(self, seed=0, **kwargs):
        unknown = set(kwargs) - set(self.FIELDS)
        if unknown:
            raise SynthError('unknown synth parameters: {0}'.format(', '.join(sorted(unknown))))
        values = dict(settings.SYNTH)
        values.update((k, v) for k, v in kwargs.items() if v is not None)
        for field in self.FIELDS:
            setattr(self, field, values[field])
        self.beta = [float(b) for b in self.beta]
        self.seed = int(seed)

        if self.n_nodes < 20:
            raise SynthError('n_nodes must be >= 20, got {0}'.format(self.n_nodes))
        if not 0 < self.positive_rate < 0.5:
            raise SynthError('positive_rate must be in (0, 0.5), got {0}'.format(
                self.positive_rate))
        if len(self.beta) != len(FEATURE_NAMES):
            raise SynthError('beta needs {0} weights, got {1}'.format(
                len(FEATURE_NAMES), len(self.beta)))
        if self.attachment < 1 or not 1 <= self.n_communities <= 99:
            raise SynthError('attachment must be >= 1 and n_communities in [1, 99]')
        if not 0 <= self.mixing <= 1:
            raise SynthError('mixing must be in [0, 1]')

    @property
    def tolerance(self):
        return max(0.005, 1.0 / self.n_nodes)

    @property
    def cutoff_ts(self):
        return T0 + HISTORY_DAYS * DAY

    def to_dict(self):
        data = OrderedDict((field, getattr(self, field)) for field in self.FIELDS)
        data['seed'] = self.seed
        return data

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        return cls(seed=data.pop('seed', 0), **data)


class SyntheticDataset(object):
    '''Generated files, commit log and planted labels'''
    def __init__(self, config, graph, file_map, commits, labels, features, achieved_rate):
        self.config = config
        self.graph = graph
        self.file_map = file_map
        self.commits = commits
        self.labels = labels
        self.features = features
        self.achieved_rate = achieved_rate

    @property
    def cutoff_ts(self):
        return self.config.cutoff_ts

    def commit_log_text(self):
        return ''.join(commit.to_json() + '\n' for commit in self.commits)

    def write(self, output_dir):
        '''Writes repo/, commits.jsonl, labels.json and synth_config.json under output_dir'''
        repo_dir = os.path.join(output_dir, 'repo')
        for path, text in self.file_map.items():
            full_path = os.path.join(repo_dir, *path.split('/'))
            ensure_dir(os.path.dirname(full_path))
            with open(full_path, 'w', newline='\n') as f:
                f.write(text)
        write_commit_log(self.commits, os.path.join(output_dir, 'commits.jsonl'))
        labels = OrderedDict((path, int(label)) for path, label in
                             zip(self.graph.node_paths, self.labels))
        with open(os.path.join(output_dir, 'labels.json'), 'w') as f:
            simplejson.dump(labels, f, indent=2)
            f.write('\n')
        config = self.config.to_dict()
        config['cutoff_ts'] = self.cutoff_ts
        config['achieved_rate'] = self.achieved_rate
        with open(os.path.join(output_dir, 'synth_config.json'), 'w') as f:
            simplejson.dump(config, f, indent=2)
            f.write('\n')
        return output_dir


def _weighted_pick(rng, pool, degrees):
    weights = degrees[pool] + 1.0
    cumulative = np.cumsum(weights)
    k = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side='right'))
    return pool[min(k, len(pool) - 1)]


def sample_import_graph(cfg, rng):
    '''Preferential attachment within communities

    Node ids come in contiguous community blocks; nodes arrive in random order and
    attach to ``attachment`` earlier nodes, chosen with probability proportional
    to degree + 1, from their own community unless a mixing draw says otherwise.

    :returns: (community per node, dict node -> list of imported nodes)
    '''
    n = cfg.n_nodes
    communities = np.arange(n) * cfg.n_communities // n
    degrees = np.zeros(n)
    arrived = []
    arrived_by_community = dict((c, []) for c in range(cfg.n_communities))
    imports = dict((v, []) for v in range(n))

    for v in rng.permutation(n):
        v = int(v)
        targets = []
        for _ in range(min(cfg.attachment, len(arrived))):
            pool = arrived_by_community[communities[v]]
            if rng.random() < cfg.mixing or not pool:
                pool = arrived
            pool = np.array([u for u in pool if u not in targets], dtype=np.int64)
            if not len(pool):
                pool = np.array([u for u in arrived if u not in targets], dtype=np.int64)
            if not len(pool):
                break
            targets.append(int(_weighted_pick(rng, pool, degrees)))
        for u in targets:
            degrees[u] += 1
            degrees[v] += 1
        imports[v] = sorted(targets)
        arrived.append(v)
        arrived_by_community[communities[v]].append(v)
    return communities, imports


def node_paths(cfg):
    width = max(4, len(str(cfg.n_nodes - 1)))
    communities = np.arange(cfg.n_nodes) * cfg.n_communities // cfg.n_nodes
    return ['c{0:02d}/m{1:0{2}d}.py'.format(int(c), i, width) for i, c in enumerate(communities)]


def render_source(module, imported_modules, n_branches):
    '''Minimal valid module: one import line per dependency, cyclomatic 1 + n_branches'''
    lines = ['"""Synthetic module {0}."""'.format(module)]
    lines.extend('import {0}'.format(name) for name in imported_modules)
    lines.extend(['', '', 'def run(x):'])
    for k in range(n_branches):
        lines.append('    if x > {0}:'.format(k))
        lines.append('        x -= {0}'.format(k + 1))
    lines.append('    return x')
    return '\n'.join(lines) + '\n'


def _lognormal(rng, median, sigma, shift):
    return math.exp(math.log(median) + shift + sigma * rng.standard_normal())


class _CommitWriter(object):
    def __init__(self):
        self.commits = []

    def add(self, author, commit_ts, message, changes, push_ts=None, revert_of=None):
        commit_id = 'c{0:07d}'.format(len(self.commits))
        push_id = 'p{0:07d}'.format(len(self.commits)) if push_ts is not None else None
        self.commits.append(CommitRecord(commit_id, author, int(commit_ts), message, changes,
                                         push_id=push_id,
                                         push_ts=None if push_ts is None else int(push_ts),
                                         revert_of=revert_of))
        return commit_id


def _add_revert_pair(writer, rng, path, author, start, stop):
    '''A commit touching only ``path`` in [start, stop), followed by its revert (<= stop)'''
    module = module_name(path)
    target_ts = int(start + rng.integers(0, max(1, stop - start - HOUR)))
    target = writer.add(author, target_ts, 'Update {0}'.format(module),
                        [FileChange(path, int(rng.integers(1, 40)), int(rng.integers(0, 20)))],
                        push_ts=target_ts + HOUR)
    revert_ts = int(min(stop, target_ts + HOUR + rng.integers(0, 4 * DAY)))
    writer.add(author, revert_ts, 'Revert "Update {0}"\n\nThis reverts commit {1}.'.format(
        module, target), [FileChange(path, int(rng.integers(0, 20)), int(rng.integers(1, 40)))],
        push_ts=revert_ts, revert_of=target)


def _simulate_history(cfg, paths, communities, latent, rng):
    '''Commits at or before the cutoff; per-file volumes are log-normal, shifted by latent risk'''
    cutoff = cfg.cutoff_ts
    window_start = cutoff - WINDOW_DAYS * DAY
    writer = _CommitWriter()
    members = dict((c, np.flatnonzero(communities == c)) for c in range(cfg.n_communities))

    n_branches = []
    for i, path in enumerate(paths):
        z = 0.5 * latent[i]
        versions = 1 + int(_lognormal(rng, 2.5, 0.6, z))
        n_authors = min(versions, DEVELOPERS_PER_COMMUNITY, 1 + int(_lognormal(rng, 1.0, 0.5, z)))
        lag_days = _lognormal(rng, 0.3, 0.6, z)
        loc_scale = _lognormal(rng, 20.0, 0.7, z)
        n_branches.append(min(30, int(_lognormal(rng, 3.0, 0.6, z))))
        n_companions = int(_lognormal(rng, 0.8, 0.7, z))
        n_reverts = int(rng.poisson(math.exp(math.log(0.15) + 1.6 * z)))

        community = int(communities[i])
        developers = rng.choice(DEVELOPERS_PER_COMMUNITY, size=n_authors, replace=False)
        authors = ['dev{0:02d}-{1:02d}'.format(community, int(d)) for d in developers]
        times = np.sort(rng.integers(T0, cutoff - DAY, size=versions))
        module = module_name(path)
        for k, commit_ts in enumerate(times):
            changes = [FileChange(path, int(rng.integers(1, int(2 * loc_scale) + 2)),
                                  int(rng.integers(0, int(loc_scale) + 1)))]
            if k == versions - 1 and n_companions:
                candidates = members[community][members[community] != i]
                chosen = rng.choice(candidates, size=min(n_companions, len(candidates)),
                                    replace=False) if len(candidates) else []
                for j in sorted(int(j) for j in chosen):
                    changes.append(FileChange(paths[j], int(rng.integers(1, 10)),
                                              int(rng.integers(0, 5))))
            push_ts = commit_ts + int(lag_days * DAY * rng.uniform(0.5, 1.5))
            writer.add(authors[k % n_authors], commit_ts, 'Update {0}'.format(module), changes,
                       push_ts=push_ts)
        for _ in range(n_reverts):
            _add_revert_pair(writer, rng, path, authors[0], window_start + HOUR, cutoff)
    return writer, n_branches


def risk_scores(features, graph, cfg):
    '''Label-free part of the risk logit for every node'''
    transformed = np.log1p(features.values)
    std = transformed.std(axis=0)
    standardised = np.divide(transformed - transformed.mean(axis=0), std,
                             out=np.zeros_like(transformed), where=std > 0)
    recent_revert = features.values[:, 0] > 0
    neighbour_fraction = np.array([recent_revert[list(neighbours)].mean() if neighbours else 0.0
                                   for neighbours in graph.adjacency])
    return cfg.signal_scale * standardised @ np.asarray(cfg.beta) + \
        cfg.contagion * neighbour_fraction


def calibrate_labels(base, uniforms, target, tolerance):
    '''Bisects the intercept until the realised positive rate is within tolerance

    :returns: (labels, intercept, achieved rate)
    '''
    lo, hi = -40.0, 40.0
    achieved = None
    for _ in range(MAX_BISECTIONS):
        intercept = 0.5 * (lo + hi)
        labels = (uniforms < sigmoid(intercept + base)).astype(np.int64)
        achieved = float(labels.mean())
        if abs(achieved - target) <= tolerance:
            return labels, intercept, achieved
        if achieved < target:
            lo = intercept
        else:
            hi = intercept
    raise SynthError('positive-rate bisection failed: achieved {0:.4f}, target {1:.4f}'.format(
        achieved, target), achieved_rate=achieved)


def generate_synthetic_dataset(cfg=None, **kwargs):
    '''Generates files, commit log and planted labels

    :param cfg: :class:`SynthConfig` (or keyword arguments to build one)
    :returns: :class:`SyntheticDataset`
    '''
    if cfg is None:
        cfg = SynthConfig(**kwargs)
    graph_rng = make_rng(cfg.seed, 'synth-graph')
    history_rng = make_rng(cfg.seed, 'synth-history')
    label_rng = make_rng(cfg.seed, 'synth-labels')

    communities, imports = sample_import_graph(cfg, graph_rng)
    paths = node_paths(cfg)
    edges = [(v, u) for v, targets in imports.items() for u in targets]
    graph = CodeGraph(paths, edges)

    community_effect = graph_rng.standard_normal(cfg.n_communities)
    latent = math.sqrt(0.5) * community_effect[communities] + \
        math.sqrt(0.5) * graph_rng.standard_normal(cfg.n_nodes)

    writer, n_branches = _simulate_history(cfg, paths, communities, latent, history_rng)
    file_map = OrderedDict()
    for i, path in enumerate(paths):
        file_map[path] = render_source(module_name(path),
                                       [module_name(paths[u]) for u in imports[i]],
                                       n_branches[i])

    features = compute_features(writer.commits, graph, file_map, cfg.cutoff_ts)
    base = risk_scores(features, graph, cfg)
    labels, intercept, achieved = calibrate_labels(base, label_rng.random(cfg.n_nodes),
                                                   cfg.positive_rate, cfg.tolerance)

    # Planted labels become revert events after the cutoff; other late commits are noise.
    cutoff = cfg.cutoff_ts
    for i in np.flatnonzero(labels):
        author = 'dev{0:02d}-00'.format(int(communities[i]))
        _add_revert_pair(writer, history_rng, paths[i], author, cutoff + DAY, cutoff + 25 * DAY)
    for i in history_rng.choice(cfg.n_nodes, size=cfg.n_nodes // 10, replace=False):
        late_ts = cutoff + int(history_rng.integers(HOUR, 30 * DAY))
        writer.add('dev{0:02d}-01'.format(int(communities[i])), late_ts,
                   'Update {0}'.format(module_name(paths[i])),
                   [FileChange(paths[i], int(history_rng.integers(1, 30)), 0)],
                   push_ts=late_ts + HOUR)

    commits = sorted(writer.commits, key=lambda c: (c.commit_ts, c.commit_id))
    log.info('synthetic dataset: {0} files, {1} edges, {2} commits, positive rate {3:.4f} '
             '(intercept {4:.3f})'.format(graph.n, len(graph.edges), len(commits), achieved,
                                          intercept))
    return SyntheticDataset(cfg, graph, file_map, commits, labels, features, achieved)
