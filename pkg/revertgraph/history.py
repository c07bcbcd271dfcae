'''Commit history: revert labels, per-file process features and their Information Value.

Commit logs are JSON-lines, one object per commit::

    {"commit_id", "author", "commit_ts", "push_id"?, "push_ts"?, "message",
     "revert_of"?, "files": [{"path", "added", "deleted"}]}

A commit is a revert event when ``revert_of`` is set or its message looks like
a revert (``Revert "...`` prefix, a ``revert:`` token, or git's
``This reverts commit <id>.`` line). Every file touched by the reverted
commit is labelled 1, reproducing commit-level (noisy) labelling.
'''
import io
import re
import tokenize
from collections import namedtuple, OrderedDict

import numpy as np
import pandas as pd
import simplejson

from revertgraph import setup_logging
from revertgraph.errors import RevertGraphError

log = setup_logging.get_logger('rg.history')

FEATURE_NAMES = [
    'revert_freq_30d',
    'file_version',
    'commit_to_push_lag_days',
    'push_set_total_loc',
    'push_set_total_cyclomatic',
    'unique_contributors',
    'dependent_modules',
    'push_set_file_count',
]
SECONDS_PER_DAY = 86400
REVERT_WINDOW_DAYS = 30

REVERT_PREFIX = 'Revert "'
REVERT_TOKEN_RE = re.compile(r'(^|\s)revert:')
REVERTS_COMMIT_RE = re.compile(r'This reverts commit ([\w.\-]+?)\.?(\s|$)')
DECISION_KEYWORDS = frozenset(['if', 'elif', 'for', 'while', 'except', 'and', 'or'])

FileChange = namedtuple('FileChange', ['path', 'added', 'deleted'])
RevertEvent = namedtuple('RevertEvent', ['commit_id', 'commit_ts', 'target_id', 'paths'])


class HistoryError(RevertGraphError):
    '''Raised for malformed commit logs and undefined feature statistics'''
    pass


class CommitRecord(object):
    '''One commit of the log

    :param commit_id: opaque id
    :param author: opaque author string (matched exactly)
    :param commit_ts: UTC seconds
    :param message: commit message
    :param file_changes: list of :class:`FileChange`
    :param push_id: optional id shared by commits pushed together
    :param push_ts: optional UTC seconds of the push, never before ``commit_ts``
    :param revert_of: optional id of the commit this one reverts
    '''
    def __init__(self, commit_id, author, commit_ts, message, file_changes,
                 push_id=None, push_ts=None, revert_of=None):
        self.commit_id = commit_id
        self.author = author
        self.commit_ts = commit_ts
        self.message = message
        self.file_changes = tuple(file_changes)
        self.push_id = push_id
        self.push_ts = push_ts
        self.revert_of = revert_of

        if not self.file_changes:
            raise HistoryError('commit {0} changes no files'.format(commit_id))
        for change in self.file_changes:
            if change.added < 0 or change.deleted < 0:
                raise HistoryError('negative line count in commit {0}'.format(commit_id))
        if push_ts is not None and push_ts < commit_ts:
            raise HistoryError('commit {0} pushed before it was committed'.format(commit_id))

    @property
    def paths(self):
        return list(OrderedDict((change.path, None) for change in self.file_changes))

    @property
    def push_key(self):
        '''Push set key: commits without a push_id form a singleton push set'''
        if self.push_id is not None:
            return 'push:{0}'.format(self.push_id)
        return 'commit:{0}'.format(self.commit_id)

    @property
    def push_time(self):
        return self.push_ts if self.push_ts is not None else self.commit_ts

    def to_dict(self):
        data = OrderedDict([
            ('commit_id', self.commit_id),
            ('author', self.author),
            ('commit_ts', self.commit_ts),
        ])
        if self.push_id is not None:
            data['push_id'] = self.push_id
        if self.push_ts is not None:
            data['push_ts'] = self.push_ts
        data['message'] = self.message
        if self.revert_of is not None:
            data['revert_of'] = self.revert_of
        data['files'] = [OrderedDict([('path', c.path), ('added', c.added),
                                      ('deleted', c.deleted)])
                         for c in self.file_changes]
        return data

    def to_json(self):
        return simplejson.dumps(self.to_dict())

    def __repr__(self):
        return 'CommitRecord({0!r}, ts={1})'.format(self.commit_id, self.commit_ts)


def _check_count(value, line_no):
    if isinstance(value, bool) or not isinstance(value, int):
        raise HistoryError('non-integer line count at line {0}'.format(line_no))
    if value < 0:
        raise HistoryError('negative line count at line {0}'.format(line_no))
    return value


def _record_from_dict(data, line_no):
    if not isinstance(data, dict):
        raise HistoryError('expected a JSON object at line {0}'.format(line_no))
    try:
        files = data['files']
        changes = [FileChange(str(f['path']),
                              _check_count(f['added'], line_no),
                              _check_count(f['deleted'], line_no)) for f in files]
        commit_ts = data['commit_ts']
        push_ts = data.get('push_ts')
        if not isinstance(commit_ts, (int, float)) or isinstance(commit_ts, bool):
            raise HistoryError('non-numeric commit_ts at line {0}'.format(line_no))
        return CommitRecord(str(data['commit_id']), str(data['author']), commit_ts,
                            str(data['message']), changes,
                            push_id=data.get('push_id'), push_ts=push_ts,
                            revert_of=data.get('revert_of'))
    except KeyError as e:
        raise HistoryError('missing field {0} at line {1}'.format(e, line_no))
    except TypeError as e:
        raise HistoryError('malformed record at line {0}: {1}'.format(line_no, e))
    except HistoryError as e:
        if 'line' in str(e):
            raise
        raise HistoryError('{0} at line {1}'.format(e, line_no))


def parse_commit_log(stream):
    '''Parses a JSON-lines commit log

    Fails fast: the first malformed line raises :class:`HistoryError` naming
    its (1-based) line number. Blank lines are skipped.

    :param stream: log text, or an iterable of lines (e.g. an open file)
    :returns: list of :class:`CommitRecord` sorted by (commit_ts, commit_id)
    '''
    if isinstance(stream, str):
        stream = stream.splitlines()
    records = []
    for line_no, line in enumerate(stream, 1):
        line = line.strip()
        if not line:
            continue
        try:
            data = simplejson.loads(line)
        except ValueError as e:
            raise HistoryError('invalid JSON at line {0}: {1}'.format(line_no, e))
        records.append(_record_from_dict(data, line_no))
    records.sort(key=lambda c: (c.commit_ts, c.commit_id))
    return records


def load_commit_log(path):
    with open(path, 'r') as f:
        return parse_commit_log(f)


def write_commit_log(commits, path):
    with open(path, 'w') as f:
        for commit in commits:
            f.write(commit.to_json())
            f.write('\n')


def _revert_target(commit):
    if commit.revert_of is not None:
        return commit.revert_of
    match = REVERTS_COMMIT_RE.search(commit.message)
    if match:
        return match.group(1)
    return None


def is_revert(commit):
    '''True if ``commit`` is a revert event'''
    if commit.revert_of is not None:
        return True
    message = commit.message
    return (message.startswith(REVERT_PREFIX) or bool(REVERT_TOKEN_RE.search(message)) or
            bool(REVERTS_COMMIT_RE.search(message)))


def find_revert_events(commits, warnings=None):
    '''Returns one :class:`RevertEvent` per revert commit, in log order

    The event's paths are those of the reverted target commit; when the target
    is unknown (or not named) the revert commit's own files are used.
    '''
    if warnings is None:
        warnings = []
    by_id = dict((c.commit_id, c) for c in commits)
    events = []
    for commit in commits:
        if not is_revert(commit):
            continue
        target_id = _revert_target(commit)
        if target_id is not None and target_id in by_id:
            paths = by_id[target_id].paths
        else:
            if target_id is not None:
                msg = 'revert {0} targets unknown commit {1}; using its own files'.format(
                    commit.commit_id, target_id)
                log.warning(msg)
                warnings.append(msg)
            paths = commit.paths
        events.append(RevertEvent(commit.commit_id, commit.commit_ts, target_id, tuple(paths)))
    return events


class LabelSet(object):
    '''Per-node revert labels plus the known/unknown partition

    :param labels: per-node 0/1 values
    :param known_mask: per-node booleans, True for nodes in the known set
    '''
    def __init__(self, labels, known_mask=None, warnings=None):
        self.labels = np.asarray(labels, dtype=np.int64)
        if self.labels.ndim != 1 or not np.isin(self.labels, [0, 1]).all():
            raise HistoryError('labels must be a 1-d array of 0/1 values')
        if known_mask is None:
            known_mask = np.ones(len(self.labels), dtype=bool)
        self.known_mask = np.asarray(known_mask, dtype=bool)
        if self.known_mask.shape != self.labels.shape:
            raise HistoryError('known_mask and labels differ in length')
        self.warnings = tuple(warnings or ())

    @property
    def n(self):
        return len(self.labels)

    @property
    def predicted_mask(self):
        return ~self.known_mask

    def class_counts(self, ids=None):
        labels = self.labels if ids is None else self.labels[ids]
        return int((labels == 0).sum()), int((labels == 1).sum())

    def with_known(self, known_ids):
        mask = np.zeros(self.n, dtype=bool)
        mask[known_ids] = True
        return LabelSet(self.labels, mask, self.warnings)

    def __eq__(self, other):
        return (isinstance(other, LabelSet) and np.array_equal(self.labels, other.labels) and
                np.array_equal(self.known_mask, other.known_mask))

    def __ne__(self, other):
        return not self == other


def label_reverts(commits, node_paths, overrides=None, since_ts=None):
    '''Derives per-file revert labels from the commit log

    :param commits: parsed commit records
    :param node_paths: the fixed node inventory (CodeGraph.node_paths)
    :param overrides: optional dict path -> 0/1 that wins over derived labels
    :param since_ts: when given, only revert events strictly after it count
    :returns: :class:`LabelSet` with every node known
    '''
    warnings = []
    index = dict((path, i) for i, path in enumerate(node_paths))
    labels = np.zeros(len(node_paths), dtype=np.int64)

    for event in find_revert_events(commits, warnings):
        if since_ts is not None and event.commit_ts <= since_ts:
            continue
        for path in event.paths:
            i = index.get(path)
            if i is not None:
                labels[i] = 1

    for path, value in sorted((overrides or {}).items()):
        if value not in (0, 1):
            raise HistoryError('override for {0} must be 0 or 1, got {1!r}'.format(path, value))
        i = index.get(path)
        if i is None:
            msg = 'override for {0} ignored: not in the node inventory'.format(path)
            log.warning(msg)
            warnings.append(msg)
            continue
        labels[i] = value
    return LabelSet(labels, warnings=warnings)


def load_overrides(path):
    with open(path, 'r') as f:
        overrides = simplejson.load(f)
    if not isinstance(overrides, dict):
        raise HistoryError('{0}: overrides must be a JSON object path -> 0|1'.format(path))
    return overrides


def cyclomatic_complexity(source_text):
    '''Static McCabe approximation: 1 + number of decision tokens

    Decision tokens are ``if``, ``elif``, ``for``, ``while``, ``except``,
    ``and`` and ``or`` (inline ``if`` and comprehension filters included).
    Text that cannot be tokenized scores 1.
    '''
    if isinstance(source_text, bytes):
        try:
            source_text = source_text.decode('utf-8')
        except UnicodeDecodeError:
            return 1
    if not source_text:
        return 1
    decisions = 0
    try:
        for token in tokenize.generate_tokens(io.StringIO(source_text).readline):
            if token.type == tokenize.NAME and token.string in DECISION_KEYWORDS:
                decisions += 1
    except (tokenize.TokenError, IndentationError, SyntaxError):
        return 1
    return 1 + decisions


class FeatureMatrix(object):
    '''n x m real matrix of node attributes, row i <-> graph node i

    :param values: array-like of shape (n, m)
    :param feature_names: m column names
    :param node_paths: optional n node paths (for export)
    '''
    def __init__(self, values, feature_names=None, node_paths=None):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 2:
            raise HistoryError('feature values must be 2-d, got shape {0}'.format(values.shape))
        if feature_names is None:
            feature_names = FEATURE_NAMES
        feature_names = list(feature_names)
        if len(feature_names) != values.shape[1]:
            raise HistoryError('{0} names for {1} columns'.format(len(feature_names),
                                                                  values.shape[1]))
        if not np.isfinite(values).all():
            raise HistoryError('feature values must be finite')
        values.setflags(write=False)
        self.values = values
        self.feature_names = feature_names
        self.node_paths = tuple(node_paths) if node_paths is not None else None

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def m(self):
        return self.values.shape[1]

    def column(self, name):
        return self.values[:, self.feature_names.index(name)]

    def to_dataframe(self, labels=None):
        frame = pd.DataFrame(self.values, columns=self.feature_names)
        if labels is not None:
            frame['label'] = labels.labels if isinstance(labels, LabelSet) else labels
        return frame

    def to_csv(self, path, labels=None):
        self.to_dataframe(labels).to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path):
        '''Reads a features CSV; returns (FeatureMatrix, LabelSet or None)'''
        frame = pd.read_csv(path)
        labels = None
        if 'label' in frame.columns:
            labels = LabelSet(frame.pop('label').values)
        return cls(frame.values, list(frame.columns)), labels


def compute_features(commits, graph, sources, cutoff_ts, window_days=REVERT_WINDOW_DAYS):
    '''Computes the eight process/structure features for every graph node

    Only commits with ``commit_ts <= cutoff_ts`` are used, so adding commits
    after the cutoff leaves the matrix unchanged.

    :param commits: parsed commit records (any order)
    :param graph: :class:`revertgraph.codegraph.CodeGraph`
    :param sources: dict path -> source text, for the cyclomatic feature
    :param cutoff_ts: UTC seconds
    :returns: :class:`FeatureMatrix` with :data:`FEATURE_NAMES` columns
    '''
    n = graph.n
    index = dict((path, i) for i, path in enumerate(graph.node_paths))
    history = sorted((c for c in commits if c.commit_ts <= cutoff_ts),
                     key=lambda c: (c.commit_ts, c.commit_id))

    versions = np.zeros(n)
    lag_sums = np.zeros(n)
    authors = [set() for _ in range(n)]
    push_sets = OrderedDict()
    for commit in history:
        push_sets.setdefault(commit.push_key, []).append(commit)
        lag = 0.0
        if commit.push_ts is not None:
            lag = (commit.push_ts - commit.commit_ts) / float(SECONDS_PER_DAY)
        for path in commit.paths:
            i = index.get(path)
            if i is None:
                continue
            versions[i] += 1
            lag_sums[i] += lag
            authors[i].add(commit.author)

    complexity_cache = {}

    def complexity(path):
        if path not in complexity_cache:
            complexity_cache[path] = cyclomatic_complexity(sources.get(path, ''))
        return complexity_cache[path]

    # Latest push set per file, ordered by (push time, key) so log order never matters.
    latest = [None] * n
    for key, push_commits in push_sets.items():
        when = (max(c.push_time for c in push_commits), key)
        files = OrderedDict()
        loc = 0
        for commit in push_commits:
            for change in commit.file_changes:
                files[change.path] = None
                loc += change.added + change.deleted
        summary = (loc, sum(complexity(path) for path in files), len(files))
        for path in files:
            i = index.get(path)
            if i is not None and (latest[i] is None or when > latest[i][0]):
                latest[i] = (when, summary)

    revert_freq = np.zeros(n)
    window_start = cutoff_ts - window_days * SECONDS_PER_DAY
    for event in find_revert_events(history):
        if window_start < event.commit_ts <= cutoff_ts:
            for path in set(event.paths):
                i = index.get(path)
                if i is not None:
                    revert_freq[i] += 1

    values = np.zeros((n, len(FEATURE_NAMES)))
    values[:, 0] = revert_freq
    values[:, 1] = versions
    values[:, 2] = np.divide(lag_sums, versions, out=np.zeros(n), where=versions > 0)
    for i in range(n):
        if latest[i] is not None:
            loc, total_complexity, file_count = latest[i][1]
            values[i, 3] = loc
            values[i, 4] = total_complexity
            values[i, 7] = file_count
        values[i, 5] = len(authors[i])
    values[:, 6] = graph.degrees()
    return FeatureMatrix(values, FEATURE_NAMES, graph.node_paths)


def information_value(column, labels, n_bins=10):
    '''Information Value of one feature column against revert labels

    Equal-frequency bins are formed from ranks (ties share a bin), which makes
    the result invariant under strictly increasing transforms of the column.
    Per-bin counts get +0.5 smoothing only when some bin lacks one class.
    '''
    y = labels.labels if isinstance(labels, LabelSet) else np.asarray(labels, dtype=np.int64)
    column = np.asarray(column, dtype=np.float64)
    if n_bins < 2:
        raise HistoryError('n_bins must be at least 2')
    if len(column) != len(y):
        raise HistoryError('column and labels differ in length')
    if len(np.unique(y)) < 2:
        raise HistoryError('IV undefined for one class')

    ranks = pd.Series(column).rank(method='min').values
    bins = np.floor((ranks - 1) * n_bins / len(column)).astype(np.int64)
    counts = pd.DataFrame({'bin': bins, 'good': y == 0, 'bad': y == 1}).groupby('bin').sum()
    goods = counts['good'].values.astype(np.float64)
    bads = counts['bad'].values.astype(np.float64)
    if (goods == 0).any() or (bads == 0).any():
        goods += 0.5
        bads += 0.5
    good_dist = goods / goods.sum()
    bad_dist = bads / bads.sum()
    return float(max(0.0, np.sum((good_dist - bad_dist) * np.log(good_dist / bad_dist))))


def iv_table(features, labels, n_bins=10):
    '''Ranks every feature column by Information Value (highest first)'''
    rows = [(name, information_value(features.values[:, j], labels, n_bins))
            for j, name in enumerate(features.feature_names)]
    table = pd.DataFrame(rows, columns=['feature', 'iv'])
    return table.sort_values('iv', ascending=False, kind='mergesort').reset_index(drop=True)
