'''Finite-difference checks of every hand-written gradient on a small fixed problem.'''
from collections import OrderedDict

import numpy as np

from revertgraph import setup_logging
from revertgraph.codegraph import CodeGraph
from revertgraph.processing.balance import edge_generator_loss, encoder_loss
from revertgraph.processing.classify import logreg_loss
from revertgraph.processing.detect import dominant_loss
from revertgraph.processing.embed import gae_loss, gcn_loss
from revertgraph.utils.numeric import gradient_check, make_rng, normalize_adjacency

log = setup_logging.get_logger('rg.gradcheck')

TOLERANCE = 1e-4


def toy_problem(seed=0, n=10, m=4):
    '''A ring with two chords, random features and alternating labels'''
    rng = make_rng(seed, 'gradcheck-problem')
    edges = [(i, (i + 1) % n) for i in range(n)] + [(0, n // 2), (1, n - 2)]
    graph = CodeGraph(['m{0:02d}.py'.format(i) for i in range(n)],
                      sorted(set((min(e), max(e)) for e in edges)))
    features = rng.standard_normal((n, m))
    labels = np.arange(n) % 2
    return graph, features, labels, rng


def loss_functions(seed=0):
    '''Returns an OrderedDict name -> (loss_fn, initial params)'''
    graph, x, y, rng = toy_problem(seed)
    n, m = x.shape
    hidden, dim = 5, 3
    operator = normalize_adjacency(graph)
    propagated = operator @ x
    onehot = np.eye(2)[y]
    train_ids = np.arange(7)
    pairs = np.array(list(graph.edges) + [(0, 3), (2, 7), (4, 8), (1, 6)], dtype=np.int64)
    targets = np.concatenate([np.ones(len(graph.edges)), np.zeros(4)])

    def weights(*shape):
        return 0.5 * rng.standard_normal(shape)

    checks = OrderedDict()
    checks['logreg'] = (lambda p: logreg_loss(p, x, y, 0.1), [weights(m), np.array(0.1)])
    checks['gcn'] = (lambda p: gcn_loss(p, operator, propagated, onehot, train_ids,
                                        np.linspace(0.5, 1.5, len(train_ids)), 5e-3),
                     [weights(m, hidden), weights(hidden, 2)])
    checks['gae'] = (lambda p: gae_loss(p, operator, propagated, pairs, targets, 1e-3),
                     [weights(m, hidden), weights(hidden, dim)])
    checks['dominant'] = (lambda p: dominant_loss(p, operator, propagated, x, pairs, targets,
                                                  0.5),
                          [weights(m, hidden), weights(hidden, dim), weights(dim, m)])
    checks['graphsmote_encoder'] = (lambda p: encoder_loss(p, propagated, onehot, train_ids),
                                    [weights(m, hidden), weights(hidden, 2)])
    h = rng.standard_normal((n, dim))
    checks['edge_generator'] = (lambda p: edge_generator_loss(p, h[pairs[:, 0]], h[pairs[:, 1]],
                                                              targets),
                                [np.eye(dim) + weights(dim, dim)])
    return checks


def run_all(epsilon=1e-5, seed=0, n_coords=100):
    '''Runs every check; returns OrderedDict name -> max relative error'''
    results = OrderedDict()
    for name, (loss_fn, params) in loss_functions(seed).items():
        results[name] = gradient_check(loss_fn, params, epsilon, n_coords, seed)
        log.info('{0:<20} max rel error {1:.3e}'.format(name, results[name]))
    return results


def failures(results, tolerance=TOLERANCE):
    return [name for name, error in results.items() if error >= tolerance]
