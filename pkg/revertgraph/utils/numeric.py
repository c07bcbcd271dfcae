'''Deterministic numeric core shared by the learning modules.

Dense matrices are plain 64-bit numpy arrays; the one sparse operator (the
normalised adjacency) is a scipy CSR matrix with sorted indices. All
randomness flows through :func:`make_rng`, a PCG64 generator seeded from a
SeedSequence, so a seed gives the same stream on every platform.
'''
import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from revertgraph import setup_logging
from revertgraph.errors import RevertGraphError

log = setup_logging.get_logger('rg.numeric')

AGREEMENT_FLOOR = 1e-10


class NumericError(RevertGraphError):
    '''Raised for non-finite losses or bad numeric arguments'''
    pass


def _salt_word(salt):
    if isinstance(salt, str):
        return int.from_bytes(salt.encode('utf-8')[:8].ljust(8, b'\0'), 'little')
    return int(salt)


def make_rng(seed, *salt):
    '''Returns a PCG64 generator derived from ``seed`` and optional salt words

    ``make_rng(seed, node_id)`` gives per-node streams that do not depend on
    the order nodes are processed in. Strings are accepted as salt.
    '''
    if seed is None or int(seed) < 0:
        raise NumericError('seed must be a non-negative integer, got {0!r}'.format(seed))
    entropy = [int(seed)] + [_salt_word(s) for s in salt]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def adjacency_matrix(graph):
    '''Symmetric 0/1 CSR adjacency matrix of a CodeGraph'''
    n = graph.n
    if graph.edges:
        edges = np.array(graph.edges, dtype=np.int64)
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
    adjacency = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    adjacency.sort_indices()
    return adjacency


def normalize_adjacency(graph):
    '''Returns the GCN propagation operator D~^-1/2 (A + I) D~^-1/2

    Entry (i, j) is 1/sqrt(d~_i d~_j) with d~ = degree + 1, so an isolated node's
    row holds a single 1.0 on the diagonal.
    '''
    adjacency = adjacency_matrix(graph) + sp.identity(graph.n, format='csr')
    inv_sqrt = 1.0 / np.sqrt(np.asarray(adjacency.sum(axis=1)).ravel())
    scale = sp.diags(inv_sqrt)
    operator = sp.csr_matrix(scale @ adjacency @ scale)
    operator.sort_indices()
    return operator


def glorot(rng, shape):
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def init_weights(rng, shapes, init='glorot'):
    if init == 'glorot':
        return [glorot(rng, shape) for shape in shapes]
    elif init == 'zeros':
        return [np.zeros(shape) for shape in shapes]
    raise NumericError('unknown weight init: {0}'.format(init))


def sigmoid(x):
    return expit(x)


def softplus(x):
    '''log(1 + exp(x)), stable for large |x|'''
    return np.logaddexp(0.0, x)


def softmax_rows(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def check_finite(name, array):
    if not np.all(np.isfinite(array)):
        raise NumericError('{0} contains non-finite values'.format(name))


class SGD(object):
    '''Plain gradient descent, updating ``params`` in place'''
    def __init__(self, params, learning_rate=0.01):
        self.params = params
        self.learning_rate = learning_rate

    def step(self, grads):
        for param, grad in zip(self.params, grads):
            param -= self.learning_rate * grad


class Adam(object):
    '''Adaptive-moment optimiser, updating ``params`` in place

    State (moments, step count) is owned by the instance.
    '''
    def __init__(self, params, learning_rate=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for param, grad, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            param -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


def _loss_value(loss_fn, params):
    result = loss_fn(params)
    loss = result[0] if isinstance(result, tuple) else result
    loss = float(loss)
    if not np.isfinite(loss):
        raise NumericError('loss is not finite: {0}'.format(loss))
    return loss


def gradient_check(loss_fn, params, epsilon=1e-5, n_coords=100, seed=0):
    '''Compares analytic gradients with central finite differences

    :param loss_fn: callable params -> (loss, list of gradients)
    :param params: list of arrays, not modified
    :param epsilon: finite-difference step, in [1e-7, 1e-4]
    :param n_coords: number of coordinates checked (all if there are fewer)
    :returns: max |g_a - g_n| / max(1e-12, |g_a| + |g_n|) over checked coordinates
    '''
    if not 1e-7 <= epsilon <= 1e-4:
        raise NumericError('epsilon {0} outside [1e-7, 1e-4]'.format(epsilon))
    params = [np.array(p, dtype=np.float64) for p in params]
    loss, grads = loss_fn(params)
    if not np.isfinite(loss):
        raise NumericError('loss is not finite: {0}'.format(loss))

    sizes = [p.size for p in params]
    offsets = np.cumsum([0] + sizes)
    total = int(offsets[-1])
    if total <= n_coords:
        coords = np.arange(total)
    else:
        coords = np.sort(make_rng(seed, 'gradcheck').choice(total, n_coords, replace=False))

    max_error = 0.0
    for coord in coords:
        k = int(np.searchsorted(offsets, coord, side='right') - 1)
        flat = params[k].reshape(-1)
        idx = coord - offsets[k]
        original = flat[idx]

        flat[idx] = original + epsilon
        loss_plus = _loss_value(loss_fn, params)
        flat[idx] = original - epsilon
        loss_minus = _loss_value(loss_fn, params)
        flat[idx] = original

        numeric = (loss_plus - loss_minus) / (2 * epsilon)
        analytic = float(np.asarray(grads[k]).reshape(-1)[idx])
        diff = abs(analytic - numeric)
        if diff < AGREEMENT_FLOOR:
            continue
        max_error = max(max_error, diff / max(1e-12, abs(analytic) + abs(numeric)))
    log.debug('gradient check over {0} coords: max rel error {1:.3e}'.format(
        len(coords), max_error))
    return max_error
