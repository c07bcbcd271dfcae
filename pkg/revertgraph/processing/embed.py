'''Node representations learned from the code graph.

* :func:`node2vec_embed` - structure only: biased second-order random walks
  fed to skip-gram with negative sampling.
* :func:`gcn_train` - supervised two-layer GCN, softmax(A relu(A X W0) W1).
* :func:`gae_embed` - unsupervised GCN encoder trained to reconstruct edges.

Gradients are written out by hand (see the ``*_loss`` functions, which
:func:`revertgraph.utils.numeric.gradient_check` verifies).
'''
from collections import OrderedDict

import numpy as np
import pandas as pd
import scipy.sparse as sp

from revertgraph import setup_logging
from revertgraph.errors import RevertGraphError
from revertgraph.history import FeatureMatrix, LabelSet
from revertgraph.load_settings import get_setting
from revertgraph.utils.numeric import (Adam, make_rng, normalize_adjacency, init_weights,
                                       sigmoid, softplus, softmax_rows, check_finite)

log = setup_logging.get_logger('rg.embed')

PROVENANCES = ('node2vec', 'gcn_hidden', 'gae', 'graphsmote')


class EmbedError(RevertGraphError):
    pass


class Embedding(object):
    '''n x d node representation, row i <-> graph node i'''
    def __init__(self, values, provenance):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 2:
            raise EmbedError('embedding must be 2-d')
        if provenance not in PROVENANCES:
            raise EmbedError('unknown provenance {0}'.format(provenance))
        check_finite('embedding', values)
        self.values = values
        self.provenance = provenance

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    @property
    def feature_names(self):
        return ['{0}_{1}'.format(self.provenance, k) for k in range(self.d)]

    def to_csv(self, path):
        frame = pd.DataFrame(self.values, columns=self.feature_names)
        frame.insert(0, 'node_id', np.arange(self.n))
        frame.to_csv(path, index=False)


def as_array(features):
    '''Raw values of a FeatureMatrix, Embedding or array-like'''
    if isinstance(features, (FeatureMatrix, Embedding)):
        return features.values
    return np.asarray(features, dtype=np.float64)


def as_operator(graph_or_operator):
    if sp.issparse(graph_or_operator):
        return sp.csr_matrix(graph_or_operator)
    return normalize_adjacency(graph_or_operator)


def _check_positive(cfg, keys):
    for key in keys:
        if not cfg[key] > 0:
            raise EmbedError('{0} must be positive, got {1!r}'.format(key, cfg[key]))


def concat_representation(parts):
    '''Column-wise concatenation of embeddings and/or feature matrices, in order'''
    if not parts:
        raise EmbedError('nothing to concatenate')
    rows = set(as_array(part).shape[0] for part in parts)
    if len(rows) != 1:
        raise EmbedError('row counts differ: {0}'.format(sorted(rows)))
    names = []
    for part in parts:
        if isinstance(part, (FeatureMatrix, Embedding)):
            names.extend(part.feature_names)
        else:
            names.extend('x{0}_{1}'.format(len(names), k) for k in range(as_array(part).shape[1]))
    values = np.hstack([as_array(part) for part in parts])
    return FeatureMatrix(values, names)


# node2vec
# --------

def transition_probabilities(graph, previous, current, p, q):
    '''Second-order walk step from ``current`` having arrived from ``previous``

    Unnormalised weight to candidate x is 1/p if x is ``previous``, 1 if x is a
    neighbour of ``previous`` and 1/q otherwise. With no previous node the
    step is uniform over neighbours.

    :returns: (neighbour ids, probabilities summing to 1)
    '''
    neighbours = np.array(graph.adjacency[current], dtype=np.int64)
    if len(neighbours) == 0:
        return neighbours, np.zeros(0)
    if previous is None:
        weights = np.ones(len(neighbours))
    else:
        previous_neighbours = set(graph.adjacency[previous])
        weights = np.array([1.0 / p if x == previous else
                            (1.0 if x in previous_neighbours else 1.0 / q)
                            for x in neighbours])
    return neighbours, weights / weights.sum()


def generate_walks(graph, cfg, seed):
    '''Returns a list of walks (lists of node ids), ``walks_per_node`` per start node

    Each start node draws from its own derived stream, so walks do not depend on
    the order start nodes are visited in.
    '''
    p, q = float(cfg['p']), float(cfg['q'])
    uniform = p == 1.0 and q == 1.0
    cumulative = {}

    def step(previous, current, rng):
        key = current if uniform or previous is None else (previous, current)
        if key not in cumulative:
            neighbours, probs = transition_probabilities(
                graph, None if uniform else previous, current, p, q)
            cumulative[key] = (neighbours, np.cumsum(probs))
        neighbours, cum = cumulative[key]
        k = int(np.searchsorted(cum, rng.random() * cum[-1], side='right'))
        return int(neighbours[min(k, len(neighbours) - 1)])

    walks = []
    for start in range(graph.n):
        rng = make_rng(seed, 'walk', start)
        for _ in range(cfg['walks_per_node']):
            walk = [start]
            if graph.adjacency[start]:
                while len(walk) < cfg['walk_length']:
                    previous = walk[-2] if len(walk) > 1 else None
                    walk.append(step(previous, walk[-1], rng))
            walks.append(walk)
    return walks


def _skipgram_pairs(walks, window):
    length = max(len(walk) for walk in walks)
    padded = np.full((len(walks), length), -1, dtype=np.int64)
    for row, walk in enumerate(walks):
        padded[row, :len(walk)] = walk
    centres, contexts = [], []
    for offset in range(1, window + 1):
        if offset >= length:
            break
        left, right = padded[:, :-offset], padded[:, offset:]
        valid = (left >= 0) & (right >= 0)
        centres.extend([left[valid], right[valid]])
        contexts.extend([right[valid], left[valid]])
    if not centres:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(centres), np.concatenate(contexts)


def node2vec_embed(graph, cfg=None, seed=0):
    '''node2vec embedding: biased walks + skip-gram with negative sampling

    :param graph: non-empty CodeGraph
    :param cfg: overrides for ``settings.NODE2VEC`` (p, q, walk_length, walks_per_node,
        window, dim, negatives, epochs, learning_rate, batch_size)
    :returns: :class:`Embedding` of the input vectors
    '''
    cfg = get_setting('NODE2VEC', cfg)
    _check_positive(cfg, ['p', 'q', 'walk_length', 'walks_per_node', 'window', 'dim',
                          'negatives', 'epochs', 'learning_rate', 'batch_size'])
    if graph.n == 0:
        raise EmbedError('cannot embed an empty graph')
    n, dim = graph.n, cfg['dim']

    walks = generate_walks(graph, cfg, seed)
    centres, contexts = _skipgram_pairs(walks, cfg['window'])
    counts = np.bincount(np.concatenate([np.asarray(w) for w in walks]), minlength=n)
    noise = counts.astype(np.float64) ** 0.75
    noise_cum = np.cumsum(noise / noise.sum())

    rng = make_rng(seed, 'skipgram')
    w_in = rng.uniform(-0.5 / dim, 0.5 / dim, size=(n, dim))
    w_out = np.zeros((n, dim))

    # Batches no larger than the node count keep repeated rows per update rare.
    batch_size = max(1, min(cfg['batch_size'], n))
    n_pairs = len(centres)
    total_steps = max(1, cfg['epochs'] * n_pairs)
    processed = 0
    for epoch in range(cfg['epochs']):
        order = rng.permutation(n_pairs)
        for start in range(0, n_pairs, batch_size):
            batch = order[start:start + batch_size]
            lr = cfg['learning_rate'] * max(1e-4, 1.0 - processed / float(total_steps))
            processed += len(batch)
            c, o = centres[batch], contexts[batch]
            negatives = np.searchsorted(noise_cum, rng.random((len(batch), cfg['negatives'])),
                                        side='right')
            negatives = np.minimum(negatives, n - 1)

            v = w_in[c]
            u_pos = w_out[o]
            u_neg = w_out[negatives]
            g_pos = sigmoid(np.sum(v * u_pos, axis=1)) - 1.0
            g_neg = sigmoid(np.einsum('bd,bkd->bk', v, u_neg))

            grad_v = g_pos[:, None] * u_pos + np.einsum('bk,bkd->bd', g_neg, u_neg)
            np.add.at(w_out, o, -lr * g_pos[:, None] * v)
            np.add.at(w_out, negatives.ravel(),
                      -lr * (g_neg[:, :, None] * v[:, None, :]).reshape(-1, dim))
            np.add.at(w_in, c, -lr * grad_v)
    log.debug('node2vec: {0} walks, {1} pairs, dim {2}'.format(len(walks), n_pairs, dim))
    return Embedding(w_in, 'node2vec')


# GCN
# ---

class GcnModel(object):
    '''Trained two-layer GCN weights; scores any graph through its own operator'''
    def __init__(self, weights, loss_history=None):
        self.weights = [np.array(w) for w in weights]
        self.loss_history = list(loss_history or [])

    def forward(self, graph_or_operator, features):
        operator = as_operator(graph_or_operator)
        w0, w1 = self.weights
        hidden = np.maximum((operator @ as_array(features)) @ w0, 0.0)
        probs = softmax_rows(operator @ hidden @ w1)
        return probs, hidden

    def predict_proba(self, graph_or_operator, features):
        return self.forward(graph_or_operator, features)[0][:, 1]


def _sample_weights(labels, train_ids, class_weights):
    y = labels[train_ids]
    if not class_weights:
        return np.ones(len(train_ids))
    counts = np.bincount(y, minlength=2).astype(np.float64)
    per_class = np.where(counts > 0, len(y) / (2.0 * np.maximum(counts, 1)), 0.0)
    return per_class[y]


def gcn_loss(params, operator, propagated, onehot, train_ids, sample_weights, weight_decay):
    '''Weighted cross-entropy over ``train_ids`` plus weight_decay/2 * |W0|^2

    :param propagated: precomputed A X
    :returns: (loss, [dW0, dW1])
    '''
    w0, w1 = params
    pre = propagated @ w0
    hidden = np.maximum(pre, 0.0)
    smoothed = operator @ hidden
    probs = softmax_rows(smoothed @ w1)

    total_weight = sample_weights.sum()
    picked = probs[train_ids, onehot[train_ids].argmax(axis=1)]
    loss = -np.sum(sample_weights * np.log(np.maximum(picked, 1e-300))) / total_weight
    loss += 0.5 * weight_decay * np.sum(w0 * w0)

    d_logits = np.zeros_like(probs)
    scale = (sample_weights / total_weight)[:, None]
    d_logits[train_ids] = (probs[train_ids] - onehot[train_ids]) * scale
    d_w1 = smoothed.T @ d_logits
    d_hidden = operator @ (d_logits @ w1.T)
    d_pre = d_hidden * (pre > 0)
    d_w0 = propagated.T @ d_pre + weight_decay * w0
    return loss, [d_w0, d_w1]


def gcn_train(graph, features, labels, train_mask, cfg=None, seed=0):
    '''Trains a two-layer GCN node classifier on the nodes in ``train_mask``

    :param graph: CodeGraph (or a precomputed normalised adjacency)
    :param features: n x m standardised features
    :param labels: LabelSet or array of 0/1 per node
    :param train_mask: boolean mask or id array of training nodes
    :param cfg: overrides for ``settings.GCN``
    :returns: (GcnModel, hidden-layer Embedding, class-1 probability per node)
    '''
    cfg = get_setting('GCN', cfg)
    _check_positive(cfg, ['hidden_dim', 'learning_rate'])
    operator = as_operator(graph)
    x = as_array(features)
    y = labels.labels if isinstance(labels, LabelSet) else np.asarray(labels, dtype=np.int64)
    train_ids = np.flatnonzero(train_mask) if np.asarray(train_mask).dtype == bool \
        else np.asarray(train_mask, dtype=np.int64)
    if len(train_ids) == 0:
        raise EmbedError('empty training mask')
    if len(np.unique(y[train_ids])) < 2:
        log.warning('GCN training mask holds a single class; predictions will be constant')

    rng = make_rng(seed, 'gcn')
    params = init_weights(rng, [(x.shape[1], cfg['hidden_dim']), (cfg['hidden_dim'], 2)],
                          cfg['init'])
    onehot = np.eye(2)[y]
    propagated = operator @ x
    sample_weights = _sample_weights(y, train_ids, cfg['class_weights'])

    optimiser = Adam(params, cfg['learning_rate'])
    history = []
    for epoch in range(cfg['epochs']):
        loss, grads = gcn_loss(params, operator, propagated, onehot, train_ids,
                               sample_weights, cfg['weight_decay'])
        history.append(float(loss))
        optimiser.step(grads)
    model = GcnModel(params, history)
    probs, hidden = model.forward(operator, x)
    if history:
        log.debug('GCN trained: loss {0:.4f} -> {1:.4f}'.format(history[0], history[-1]))
    return model, Embedding(hidden, 'gcn_hidden'), probs[:, 1]


# GAE
# ---

def sample_non_edges(graph, count, rng):
    '''Draws ``count`` distinct node pairs (i < j) that are not edges, uniformly'''
    n = graph.n
    available = n * (n - 1) // 2 - len(graph.edges)
    count = min(count, available)
    if count <= 0:
        return np.zeros((0, 2), dtype=np.int64)
    edges = graph.edge_set()
    chosen = OrderedDict()
    while len(chosen) < count:
        draws = rng.integers(0, n, size=(2 * (count - len(chosen)) + 8, 2))
        for i, j in draws:
            if i == j:
                continue
            pair = (int(min(i, j)), int(max(i, j)))
            if pair not in edges and pair not in chosen:
                chosen[pair] = None
                if len(chosen) == count:
                    break
    return np.array(list(chosen), dtype=np.int64)


def reconstruction_pairs(graph, rng):
    '''All edges (target 1) plus as many sampled non-edges (target 0)'''
    positives = np.array(graph.edges, dtype=np.int64).reshape(-1, 2)
    negatives = sample_non_edges(graph, len(positives), rng)
    pairs = np.vstack([positives, negatives])
    targets = np.concatenate([np.ones(len(positives)), np.zeros(len(negatives))])
    return pairs, targets


def encode(params, operator, propagated):
    '''Two-layer GCN encoder with linear output: Z = A relu(A X W0) W1'''
    w0, w1 = params
    pre = propagated @ w0
    smoothed = operator @ np.maximum(pre, 0.0)
    return smoothed @ w1, pre, smoothed


def encoder_backward(params, operator, propagated, pre, smoothed, d_z):
    w0, w1 = params
    d_w1 = smoothed.T @ d_z
    d_pre = (operator @ (d_z @ w1.T)) * (pre > 0)
    return [propagated.T @ d_pre, d_w1]


def pair_scores(z, pairs):
    '''Decoder logits z_i . z_j for each row of ``pairs``'''
    return np.sum(z[pairs[:, 0]] * z[pairs[:, 1]], axis=1)


def scatter_pair_grad(z, pairs, d_scores):
    d_z = np.zeros_like(z)
    np.add.at(d_z, pairs[:, 0], d_scores[:, None] * z[pairs[:, 1]])
    np.add.at(d_z, pairs[:, 1], d_scores[:, None] * z[pairs[:, 0]])
    return d_z


def gae_loss(params, operator, propagated, pairs, targets, weight_decay=0.0):
    '''Mean binary cross-entropy of logistic(z_i . z_j) against edge targets'''
    z, pre, smoothed = encode(params, operator, propagated)
    scores = pair_scores(z, pairs)
    loss = np.mean(softplus(scores) - targets * scores)
    loss += 0.5 * weight_decay * np.sum(params[0] * params[0])
    d_z = scatter_pair_grad(z, pairs, (sigmoid(scores) - targets) / len(pairs))
    grads = encoder_backward(params, operator, propagated, pre, smoothed, d_z)
    grads[0] += weight_decay * params[0]
    return loss, grads


def edge_probability(embedding, i, j):
    '''Decoder probability logistic(z_i . z_j); symmetric in i and j'''
    z = as_array(embedding)
    return float(sigmoid(np.dot(z[i], z[j])))


def gae_embed(graph, features, cfg=None, seed=0, return_history=False):
    '''Graph autoencoder embedding

    Trains the encoder on all edges plus an equal number of non-edges that are
    re-sampled every epoch.

    :param cfg: overrides for ``settings.GAE`` (hidden_dim, dim, epochs, learning_rate,
        weight_decay, init)
    :returns: :class:`Embedding` Z (and the loss history if asked)
    '''
    cfg = get_setting('GAE', cfg)
    _check_positive(cfg, ['hidden_dim', 'dim', 'learning_rate'])
    operator = normalize_adjacency(graph)
    propagated = operator @ as_array(features)
    rng = make_rng(seed, 'gae')
    params = init_weights(rng, [(propagated.shape[1], cfg['hidden_dim']),
                                (cfg['hidden_dim'], cfg['dim'])], cfg['init'])

    history = []
    if graph.edges:
        optimiser = Adam(params, cfg['learning_rate'])
        for epoch in range(cfg['epochs']):
            pairs, targets = reconstruction_pairs(graph, rng)
            loss, grads = gae_loss(params, operator, propagated, pairs, targets,
                                   cfg['weight_decay'])
            history.append(float(loss))
            optimiser.step(grads)
    else:
        log.warning('GAE: graph has no edges; returning the untrained encoding')
    embedding = Embedding(encode(params, operator, propagated)[0], 'gae')
    if return_history:
        return embedding, history
    return embedding
