'''Anomaly detectors; every score is "higher = more anomalous".

LOF and the one-class SVM are seed-free and fully deterministic. The
isolation forest comes from scikit-learn (its scores are negated
``score_samples``, i.e. 2^(-E[h(x)]/c(psi)) in (0, 1)). Dominant is a dual
decoder graph autoencoder trained here with hand-written gradients.
'''
import math

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist
from sklearn.ensemble import IsolationForest
from sklearn.metrics.pairwise import rbf_kernel

from revertgraph import setup_logging
from revertgraph.errors import RevertGraphError
from revertgraph.load_settings import get_setting
from revertgraph.processing.embed import (as_array, reconstruction_pairs, encode,
                                          encoder_backward, pair_scores, scatter_pair_grad)
from revertgraph.utils.numeric import (Adam, make_rng, normalize_adjacency, init_weights,
                                       sigmoid, check_finite)

log = setup_logging.get_logger('rg.detect')

MIN_DENSITY_DISTANCE = 1e-12


class DetectError(RevertGraphError):
    '''Detector failure; ``residual`` is set when a solver did not converge'''
    def __init__(self, message, residual=None):
        super(DetectError, self).__init__(message)
        self.residual = residual


class AnomalyScores(object):
    '''Per-sample outlier scores

    :param scores: per-sample reals, higher = more anomalous
    :param method: detector tag
    :param contamination: assumed anomaly fraction used by :func:`threshold`
    '''
    def __init__(self, scores, method, contamination=None):
        self.scores = np.asarray(scores, dtype=np.float64)
        check_finite('{0} scores'.format(method), self.scores)
        self.method = method
        self.contamination = contamination

    def __len__(self):
        return len(self.scores)

    def with_contamination(self, contamination):
        return AnomalyScores(self.scores, self.method, contamination)

    def to_csv(self, path, node_ids=None):
        node_ids = np.arange(len(self)) if node_ids is None else node_ids
        frame = pd.DataFrame({'node_id': node_ids, 'score': self.scores})
        if self.contamination is not None:
            frame['label'] = threshold(self)
        frame.to_csv(path, index=False)


def threshold(scores):
    '''Labels the top ceil(contamination * n) scores 1; ties at the cut go to lower indices'''
    contamination = scores.contamination
    if contamination is None or not 0 < contamination < 1:
        raise DetectError('contamination must be in (0, 1), got {0!r}'.format(contamination))
    n = len(scores)
    count = min(n, int(math.ceil(contamination * n - 1e-9)))
    order = np.lexsort((np.arange(n), -scores.scores))
    labels = np.zeros(n, dtype=np.int64)
    labels[order[:count]] = 1
    return labels


def lof_scores(features, k=None):
    '''Local Outlier Factor with exactly k neighbours per point (ties by index)'''
    x = as_array(features)
    n = len(x)
    k = get_setting('LOF')['k'] if k is None else k
    if not n > k >= 1:
        raise DetectError('LOF needs n > k >= 1 (n={0}, k={1})'.format(n, k))

    distances = cdist(x, x)
    np.fill_diagonal(distances, np.inf)
    neighbours = np.argsort(distances, axis=1, kind='stable')[:, :k]
    rows = np.arange(n)[:, None]
    k_distance = distances[np.arange(n), neighbours[:, -1]]
    reach = np.maximum(k_distance[neighbours], distances[rows, neighbours])
    lrd = 1.0 / np.maximum(reach.mean(axis=1), MIN_DENSITY_DISTANCE)
    return AnomalyScores(lrd[neighbours].mean(axis=1) / lrd, 'lof')


def isolation_forest_scores(features, n_trees=None, subsample_size=None, seed=0):
    '''Isolation Forest anomaly scores s(x) = 2^(-E[h(x)]/c(psi))'''
    x = as_array(features)
    cfg = get_setting('IFOREST')
    n_trees = cfg['n_trees'] if n_trees is None else n_trees
    subsample_size = cfg['subsample_size'] if subsample_size is None else subsample_size
    if len(x) < 2:
        raise DetectError('isolation forest needs at least 2 samples')
    forest = IsolationForest(n_estimators=n_trees, max_samples=min(subsample_size, len(x)),
                             random_state=seed)
    forest.fit(x)
    return AnomalyScores(-forest.score_samples(x), 'iforest')


class OneClassSvm(object):
    '''One-class SVM dual solved by SMO-style pair updates

    Minimises 1/2 a'Ka subject to 0 <= a_i <= 1/(nu n) and sum(a) = 1; the
    decision value of x is sum_i a_i k(x_i, x) - rho.
    '''
    def __init__(self, nu=None, gamma=None, tol=None, max_iter=None):
        cfg = get_setting('OCSVM')
        self.nu = cfg['nu'] if nu is None else nu
        self.gamma = cfg['gamma'] if gamma is None else gamma
        self.tol = cfg['tol'] if tol is None else tol
        self.max_iter = cfg['max_iter'] if max_iter is None else max_iter
        if not 0 < self.nu <= 1:
            raise DetectError('nu must be in (0, 1], got {0}'.format(self.nu))
        if self.gamma is not None and not self.gamma > 0:
            raise DetectError('gamma must be positive, got {0}'.format(self.gamma))

    def fit(self, features):
        x = as_array(features)
        n = len(x)
        if n < 2:
            raise DetectError('one-class SVM needs at least 2 samples')
        gamma = self.gamma if self.gamma is not None else 1.0 / x.shape[1]
        kernel = rbf_kernel(x, gamma=gamma)
        upper = 1.0 / (self.nu * n)

        # Feasible start: fill the first floor(nu n) multipliers to the box bound.
        alpha = np.zeros(n)
        n_full = min(n, int(self.nu * n))
        alpha[:n_full] = upper
        if n_full < n:
            alpha[n_full] = 1.0 - n_full * upper
        grad = kernel @ alpha

        residual = np.inf
        iteration = 0
        for iteration in range(self.max_iter):
            can_grow = np.flatnonzero(alpha < upper)
            can_shrink = np.flatnonzero(alpha > 0)
            if not len(can_grow) or not len(can_shrink):
                # nu == 1: every multiplier sits on the bound.
                residual = 0.0
                break
            i = can_grow[np.argmin(grad[can_grow])]
            j = can_shrink[np.argmax(grad[can_shrink])]
            residual = grad[j] - grad[i]
            if residual < self.tol:
                break
            curvature = max(kernel[i, i] + kernel[j, j] - 2 * kernel[i, j], 1e-12)
            delta = min(residual / curvature, upper - alpha[i], alpha[j])
            alpha[i] += delta
            alpha[j] -= delta
            grad += delta * (kernel[:, i] - kernel[:, j])
        else:
            raise DetectError('one-class SVM did not converge in {0} iterations '
                              '(KKT residual {1:.3e})'.format(self.max_iter, residual),
                              residual=residual)

        free = (alpha > MIN_DENSITY_DISTANCE) & (alpha < upper - MIN_DENSITY_DISTANCE)
        if free.any():
            rho = grad[free].mean()
        else:
            at_bound = alpha >= upper - MIN_DENSITY_DISTANCE
            at_zero = ~at_bound
            rho = 0.5 * (grad[at_bound].max() if at_bound.any() else grad.min()) + \
                0.5 * (grad[at_zero].min() if at_zero.any() else grad.max())
        self.x = x
        self.alpha = alpha
        self.rho = float(rho)
        self.gamma_ = gamma
        self.upper = upper
        self.residual = float(residual)
        self.n_iter = iteration
        return self

    def decision_function(self, features):
        return rbf_kernel(as_array(features), self.x, gamma=self.gamma_) @ self.alpha - self.rho

    def score(self, features):
        return -self.decision_function(features)


def ocsvm_scores(features, nu=None, gamma=None, tol=None, max_iter=None):
    '''One-class SVM scores rho - sum_i a_i k(x_i, x) on the fitted data'''
    model = OneClassSvm(nu, gamma, tol, max_iter).fit(features)
    return AnomalyScores(model.score(features), 'ocsvm')


# Dominant
# --------

def dominant_loss(params, operator, propagated, attributes, pairs, targets, alpha):
    '''alpha * mean squared structure error + (1 - alpha) * |X - A Z W|_F^2 / n

    ``params`` is [W0, W1] or, when the attribute decoder is on, [W0, W1, W2].
    '''
    z, pre, smoothed = encode(params[:2], operator, propagated)
    probs = sigmoid(pair_scores(z, pairs))
    structure_residual = probs - targets
    loss = alpha * np.mean(structure_residual ** 2)
    d_scores = alpha * 2 * structure_residual * probs * (1 - probs) / len(pairs)
    d_z = scatter_pair_grad(z, pairs, d_scores)

    grads_w2 = []
    if alpha < 1:
        n = len(attributes)
        smoothed_z = operator @ z
        residual = smoothed_z @ params[2] - attributes
        loss += (1 - alpha) * np.sum(residual ** 2) / n
        d_recon = 2 * (1 - alpha) * residual / n
        grads_w2 = [smoothed_z.T @ d_recon]
        d_z += operator @ (d_recon @ params[2].T)
    return loss, encoder_backward(params[:2], operator, propagated, pre, smoothed, d_z) + grads_w2


class DominantModel(object):
    def __init__(self, params, alpha, loss_history):
        self.params = params
        self.alpha = alpha
        self.loss_history = loss_history


def _dominant_inputs(graph, features, alpha):
    x = as_array(features)
    # With alpha == 1 the attributes play no part at all.
    encoder_input = np.ones((graph.n, 1)) if alpha >= 1 else x
    return x, encoder_input


def dominant_train(graph, features, cfg=None, seed=0):
    cfg = get_setting('DOMINANT', cfg)
    alpha = cfg['alpha']
    if not 0 <= alpha <= 1:
        raise DetectError('Dominant alpha must be in [0, 1], got {0}'.format(alpha))
    x, encoder_input = _dominant_inputs(graph, features, alpha)
    operator = normalize_adjacency(graph)
    propagated = operator @ encoder_input
    rng = make_rng(seed, 'dominant')
    hidden = cfg['hidden_dim']
    shapes = [(encoder_input.shape[1], hidden), (hidden, hidden)]
    if alpha < 1:
        shapes.append((hidden, x.shape[1]))
    params = init_weights(rng, shapes)

    optimiser = Adam(params, cfg['learning_rate'])
    history = []
    for epoch in range(cfg['epochs']):
        pairs, targets = reconstruction_pairs(graph, rng)
        if not len(pairs):
            break
        loss, grads = dominant_loss(params, operator, propagated, x, pairs, targets, alpha)
        history.append(float(loss))
        optimiser.step(grads)
    return DominantModel(params, alpha, history)


def dominant_scores(graph, features, cfg=None, seed=0):
    '''Dominant reconstruction-error scores for every node

    score_i = alpha * sqrt(sum of squared structure residuals over the sampled pairs
    touching i) + (1 - alpha) * |x_i - x_hat_i|. The scoring pairs are all edges
    plus an equal number of non-edges, drawn from a stream derived from ``seed``.
    '''
    model = dominant_train(graph, features, cfg, seed)
    alpha = model.alpha
    x, encoder_input = _dominant_inputs(graph, features, alpha)
    operator = normalize_adjacency(graph)
    z = encode(model.params[:2], operator, operator @ encoder_input)[0]

    pairs, targets = reconstruction_pairs(graph, make_rng(seed, 'dominant-score'))
    squared = np.zeros(graph.n)
    if len(pairs):
        residual = (sigmoid(pair_scores(z, pairs)) - targets) ** 2
        np.add.at(squared, pairs[:, 0], residual)
        np.add.at(squared, pairs[:, 1], residual)
    scores = alpha * np.sqrt(squared)
    if alpha < 1:
        reconstructed = (operator @ z) @ model.params[2]
        scores = scores + (1 - alpha) * np.linalg.norm(x - reconstructed, axis=1)
    return AnomalyScores(scores, 'dominant')
