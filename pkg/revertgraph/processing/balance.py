'''Class rebalancing for the training split.

Random up/down sampling are delegated to imbalanced-learn and reported as
index lists, so feature rows are never altered. SMOTE is implemented here
because callers need the provenance of each synthetic row (base sample,
neighbour, interpolation weight). :func:`graph_smote` applies the same
interpolation in GCN embedding space and wires synthetic nodes into the
graph with a learned edge generator.
'''
from collections import namedtuple

import numpy as np
from scipy.spatial.distance import cdist
from imblearn.over_sampling import RandomOverSampler
from imblearn.under_sampling import RandomUnderSampler

from revertgraph import setup_logging
from revertgraph.codegraph import CodeGraph
from revertgraph.errors import RevertGraphError
from revertgraph.history import LabelSet
from revertgraph.load_settings import get_setting
from revertgraph.processing.embed import (Embedding, as_array, sample_non_edges)
from revertgraph.utils.numeric import (Adam, make_rng, normalize_adjacency, init_weights,
                                       sigmoid, softplus, softmax_rows)

log = setup_logging.get_logger('rg.balance')

ORIGINAL = 'original'
DUPLICATE = 'duplicate'
SYNTHETIC = 'synthetic'

SmoteProvenance = namedtuple('SmoteProvenance', ['bases', 'neighbours', 'weights'])


class BalanceError(RevertGraphError):
    pass


class ResampledSet(object):
    '''Outcome of resampling a (training) set

    :param indices: per sample, index into the resampled set, or -1 if synthetic
    :param labels: per sample label
    :param origins: per sample tag: original, duplicate or synthetic
    :param synthetic_rows: feature rows of the synthetic samples, in order
    '''
    def __init__(self, indices, labels, origins, synthetic_rows=None):
        self.indices = np.asarray(indices, dtype=np.int64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.origins = list(origins)
        if synthetic_rows is None:
            synthetic_rows = np.zeros((0, 0))
        self.synthetic_rows = np.asarray(synthetic_rows, dtype=np.float64)
        n_synthetic = int(np.sum(self.indices < 0))
        if n_synthetic and len(self.synthetic_rows) != n_synthetic:
            raise BalanceError('{0} synthetic samples but {1} synthetic rows'.format(
                n_synthetic, len(self.synthetic_rows)))

    def __len__(self):
        return len(self.indices)

    def class_counts(self):
        return int((self.labels == 0).sum()), int((self.labels == 1).sum())

    def original_indices(self):
        '''Distinct indices of real samples used (originals and duplicates)'''
        return np.unique(self.indices[self.indices >= 0])

    def features(self, values):
        '''Assembles the resampled feature matrix from the source rows ``values``'''
        values = as_array(values)
        out = np.zeros((len(self.indices), values.shape[1]))
        real = self.indices >= 0
        out[real] = values[self.indices[real]]
        if (~real).any():
            out[~real] = self.synthetic_rows
        return out


def _label_array(labels):
    y = labels.labels if isinstance(labels, LabelSet) else np.asarray(labels, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise BalanceError('resampling needs both classes, got counts {0}'.format(
            np.bincount(y, minlength=2).tolist()))
    return y


def _tag_origins(indices):
    seen = set()
    origins = []
    for i in indices:
        origins.append(DUPLICATE if i in seen else ORIGINAL)
        seen.add(i)
    return origins


def upsample(labels, seed):
    '''Draws minority samples with replacement until both classes have the majority count'''
    y = _label_array(labels)
    sampler = RandomOverSampler(random_state=seed)
    sampler.fit_resample(np.arange(len(y)).reshape(-1, 1), y)
    indices = np.asarray(sampler.sample_indices_, dtype=np.int64)
    return ResampledSet(indices, y[indices], _tag_origins(indices))


def downsample(labels, seed):
    '''Keeps a random majority subset (without replacement) the size of the minority'''
    y = _label_array(labels)
    sampler = RandomUnderSampler(random_state=seed, replacement=False)
    sampler.fit_resample(np.arange(len(y)).reshape(-1, 1), y)
    indices = np.sort(np.asarray(sampler.sample_indices_, dtype=np.int64))
    return ResampledSet(indices, y[indices], [ORIGINAL] * len(indices))


def minority_neighbours(x_minority, k):
    '''k nearest minority neighbours of each minority row (Euclidean, ties by index)'''
    distances = cdist(x_minority, x_minority)
    np.fill_diagonal(distances, np.inf)
    return np.argsort(distances, axis=1, kind='stable')[:, :k]


def smote(x_minority, k, n_synthetic, seed, return_provenance=False):
    '''SMOTE interpolation among minority samples

    Synthetic row t uses base ``t mod count`` and one of its k nearest minority
    neighbours: x_base + u * (x_nn - x_base), u ~ U(0, 1).

    :returns: n_synthetic x m array (and a :class:`SmoteProvenance` if asked)
    '''
    x_minority = as_array(x_minority)
    count = len(x_minority)
    if count < 2:
        raise BalanceError('SMOTE needs >= 2 minority samples, got {0}'.format(count))
    if k < 1:
        raise BalanceError('SMOTE needs k >= 1')
    k = min(k, count - 1)

    if n_synthetic <= 0:
        rows = np.zeros((0, x_minority.shape[1]))
        empty = np.zeros(0, dtype=np.int64)
        provenance = SmoteProvenance(empty, empty, np.zeros(0))
        return (rows, provenance) if return_provenance else rows

    rng = make_rng(seed, 'smote')
    neighbours = minority_neighbours(x_minority, k)
    bases = np.arange(n_synthetic) % count
    chosen = neighbours[bases, rng.integers(0, k, size=n_synthetic)]
    weights = rng.random(n_synthetic)
    rows = x_minority[bases] + weights[:, None] * (x_minority[chosen] - x_minority[bases])
    if return_provenance:
        return rows, SmoteProvenance(bases, chosen, weights)
    return rows


def smote_resample(features, labels, seed, k=None):
    '''Adds SMOTE samples of the minority class until the classes are level'''
    y = _label_array(labels)
    x = as_array(features)
    k = get_setting('SMOTE')['k'] if k is None else k
    counts = np.bincount(y, minlength=2)
    minority = int(np.argmin(counts))
    minority_ids = np.flatnonzero(y == minority)
    n_synthetic = int(counts.max() - counts.min())
    rows = smote(x[minority_ids], k, n_synthetic, seed)

    indices = np.concatenate([np.arange(len(y)), -np.ones(n_synthetic, dtype=np.int64)])
    labels_out = np.concatenate([y, np.full(n_synthetic, minority)])
    origins = [ORIGINAL] * len(y) + [SYNTHETIC] * n_synthetic
    return ResampledSet(indices, labels_out, origins, rows)


RESAMPLERS = {
    'up': lambda x, y, seed, k=None: upsample(y, seed),
    'down': lambda x, y, seed, k=None: downsample(y, seed),
    'smote': smote_resample,
}


# GraphSMOTE
# ----------

GraphSmoteResult = namedtuple('GraphSmoteResult', [
    'graph', 'features', 'labels', 'train_mask', 'encoding', 'provenance', 'synthetic_ids'])


def encoder_loss(params, propagated, onehot, train_ids):
    '''Cross-entropy of a linear head on the one-layer encoding relu(A X We)'''
    w_enc, w_head = params
    pre = propagated @ w_enc
    hidden = np.maximum(pre, 0.0)
    probs = softmax_rows(hidden[train_ids] @ w_head)
    targets = onehot[train_ids]
    loss = -np.mean(np.log(np.maximum(np.sum(probs * targets, axis=1), 1e-300)))
    d_logits = (probs - targets) / len(train_ids)
    d_head = hidden[train_ids].T @ d_logits
    d_pre = np.zeros_like(pre)
    d_pre[train_ids] = (d_logits @ w_head.T) * (pre[train_ids] > 0)
    return loss, [propagated.T @ d_pre, d_head]


def edge_generator_loss(params, h_left, h_right, targets):
    '''Mean binary cross-entropy of logistic(h_u S h_v) against edge targets'''
    s = params[0]
    projected = h_left @ s
    scores = np.sum(projected * h_right, axis=1)
    loss = np.mean(softplus(scores) - targets * scores)
    d_scores = (sigmoid(scores) - targets) / len(targets)
    return loss, [h_left.T @ (d_scores[:, None] * h_right)]


def _train_edge_generator(graph, encoding, train_ids, cfg, rng):
    train_graph, old_ids = graph.subgraph(train_ids)
    dim = encoding.shape[1]
    s = [np.eye(dim)]
    positives = np.array(train_graph.edges, dtype=np.int64).reshape(-1, 2)
    if not len(positives):
        log.warning('GraphSMOTE: training graph has no edges; edge generator left untrained')
        return s[0]
    optimiser = Adam(s, cfg['learning_rate'])
    for epoch in range(cfg['edge_epochs']):
        negatives = sample_non_edges(train_graph, len(positives), rng)
        pairs = old_ids[np.vstack([positives, negatives])]
        targets = np.concatenate([np.ones(len(positives)), np.zeros(len(negatives))])
        loss, grads = edge_generator_loss(s, encoding[pairs[:, 0]], encoding[pairs[:, 1]],
                                          targets)
        optimiser.step(grads)
    return s[0]


def graph_smote(graph, features, labels, train_mask, cfg=None, seed=0):
    '''Oversamples minority training nodes in embedding space and links them into the graph

    1. a one-layer GCN encoder (trained with a linear head on the training nodes)
       embeds every node;
    2. SMOTE interpolates minority training nodes up to parity with the majority;
    3. a bilinear edge generator logistic(h_u S h_v), trained on the edges and
       sampled non-edges of the training graph, links each synthetic node to every
       training node it scores above the threshold.

    Synthetic nodes are appended after the original ones, so original node ids
    (and the test nodes among them) are unchanged.

    :param cfg: overrides for ``settings.GRAPHSMOTE``
    :returns: :class:`GraphSmoteResult` whose features are the embedding rows
    '''
    cfg = get_setting('GRAPHSMOTE', cfg)
    y = labels.labels if isinstance(labels, LabelSet) else np.asarray(labels, dtype=np.int64)
    train_ids = np.flatnonzero(train_mask) if np.asarray(train_mask).dtype == bool \
        else np.sort(np.asarray(train_mask, dtype=np.int64))
    counts = np.bincount(y[train_ids], minlength=2)
    if counts.min() == 0:
        raise BalanceError('GraphSMOTE needs both classes in the training mask')

    rng = make_rng(seed, 'graphsmote')
    operator = normalize_adjacency(graph)
    propagated = operator @ as_array(features)
    params = init_weights(rng, [(propagated.shape[1], cfg['hidden_dim']), (cfg['hidden_dim'], 2)])
    optimiser = Adam(params, cfg['learning_rate'])
    onehot = np.eye(2)[y]
    for epoch in range(cfg['encoder_epochs']):
        loss, grads = encoder_loss(params, propagated, onehot, train_ids)
        optimiser.step(grads)
    encoding = np.maximum(propagated @ params[0], 0.0)

    minority = int(np.argmin(counts))
    minority_ids = train_ids[y[train_ids] == minority]
    n_synthetic = int(counts.max() - counts.min())
    rows, provenance = smote(encoding[minority_ids], cfg['k'], n_synthetic, seed,
                             return_provenance=True)

    s = _train_edge_generator(graph, encoding, train_ids, cfg, rng)
    n = graph.n
    synthetic_ids = np.arange(n, n + n_synthetic)
    new_edges = []
    if n_synthetic:
        probs = sigmoid(rows @ s @ encoding[train_ids].T)
        for k, node in enumerate(synthetic_ids):
            new_edges.extend((int(node), int(j)) for j in
                             train_ids[probs[k] > cfg['edge_threshold']])
    paths = list(graph.node_paths) + ['<synthetic:{0}>'.format(k) for k in range(n_synthetic)]
    augmented = CodeGraph(paths, list(graph.edges) + new_edges, graph.warnings)
    log.debug('GraphSMOTE: {0} synthetic nodes, {1} synthetic edges'.format(
        n_synthetic, len(new_edges)))

    mask = np.zeros(n + n_synthetic, dtype=bool)
    mask[train_ids] = True
    mask[synthetic_ids] = True
    # Provenance neighbour/base ids are mapped back to graph node ids.
    provenance = SmoteProvenance(minority_ids[provenance.bases],
                                 minority_ids[provenance.neighbours], provenance.weights)
    return GraphSmoteResult(augmented,
                            Embedding(np.vstack([encoding, rows]), 'graphsmote'),
                            np.concatenate([y, np.full(n_synthetic, minority)]),
                            mask, encoding, provenance, synthetic_ids)
