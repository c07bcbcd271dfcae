'''Supervised baselines: logistic regression, linear SVM and random forest.

All models expose ``predict_proba`` (probability of the revert class) and
``predict`` (hard 0/1 labels), and serialise to a versioned JSON document.
Forests are flattened to plain node arrays when trained, and always predict
from those arrays, so a reloaded forest predicts exactly like the original.
'''
import numpy as np
import simplejson
from sklearn.ensemble import RandomForestClassifier

from revertgraph import setup_logging
from revertgraph.errors import RevertGraphError
from revertgraph.load_settings import get_setting
from revertgraph.processing.embed import as_array
from revertgraph.utils.numeric import sigmoid, softplus, check_finite
from revertgraph.utils.utils import config_hash

log = setup_logging.get_logger('rg.classify')

FORMAT_VERSION = 1
KINDS = ('logreg', 'linear_svm', 'random_forest')


class ClassifyError(RevertGraphError):
    pass


def exact_complement(probabilities):
    '''Nudges probabilities below 0.5 by at most one ulp so that 1 - p is exact

    For p in [0.5, 1] the subtraction 1 - p is exact already; below that, p is
    replaced by 1 - (1 - p), whose own complement is exact. Either way
    p + (1 - p) == 1.0 holds in floating point.
    '''
    p = np.asarray(probabilities, dtype=np.float64)
    return np.where(p < 0.5, 1.0 - (1.0 - p), p)


def _check_inputs(features, labels):
    x = as_array(features)
    if x.ndim != 2:
        raise ClassifyError('features must be 2-d, got shape {0}'.format(x.shape))
    try:
        check_finite('features', x)
    except RevertGraphError as e:
        raise ClassifyError(str(e))
    y = np.asarray(labels, dtype=np.int64)
    if len(y) != len(x):
        raise ClassifyError('{0} feature rows but {1} labels'.format(len(x), len(y)))
    return x, y


class ClassifierModel(object):
    '''Trained classifier

    :param kind: one of logreg, linear_svm, random_forest
    :param hyperparameters: dict used for training
    :param seed: training seed
    :param parameters: dict of learned arrays/values
    '''
    def __init__(self, kind, hyperparameters, seed, parameters):
        if kind not in KINDS:
            raise ClassifyError('unknown classifier kind: {0}'.format(kind))
        self.kind = kind
        self.hyperparameters = dict(hyperparameters)
        self.seed = seed
        self.parameters = parameters
        self.config_hash = config_hash({'kind': kind, 'hyperparameters': self.hyperparameters,
                                        'seed': seed})

    def _proba(self, features):
        raise NotImplementedError()

    def predict_proba(self, features):
        return exact_complement(self._proba(features))

    def predict_proba_complement(self, features):
        return 1.0 - self.predict_proba(features)

    def predict(self, features):
        return (self.predict_proba(features) >= 0.5).astype(np.int64)

    def to_dict(self):
        parameters = dict((k, v.tolist() if isinstance(v, np.ndarray) else v)
                          for k, v in self.parameters.items())
        return {
            'format_version': FORMAT_VERSION,
            'kind': self.kind,
            'hyperparameters': self.hyperparameters,
            'seed': self.seed,
            'config_hash': self.config_hash,
            'parameters': parameters,
        }

    def to_json(self):
        return simplejson.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_json(text):
        data = simplejson.loads(text)
        if data.get('format_version') != FORMAT_VERSION:
            raise ClassifyError('unsupported model format version: {0}'.format(
                data.get('format_version')))
        model_class = {'logreg': LogRegModel, 'linear_svm': LinearSvmModel,
                       'random_forest': RandomForestModel}.get(data['kind'])
        if model_class is None:
            raise ClassifyError('unknown classifier kind: {0}'.format(data['kind']))
        return model_class(data['hyperparameters'], data['seed'],
                           model_class.load_parameters(data['parameters']))

    def save(self, path):
        with open(path, 'w') as f:
            f.write(self.to_json())

    @staticmethod
    def load(path):
        with open(path, 'r') as f:
            return ClassifierModel.from_json(f.read())


class LogRegModel(ClassifierModel):
    def __init__(self, hyperparameters, seed, parameters):
        super(LogRegModel, self).__init__('logreg', hyperparameters, seed, parameters)

    @staticmethod
    def load_parameters(data):
        data = dict(data)
        data['w'] = np.array(data['w'], dtype=np.float64)
        return data

    def _proba(self, features):
        x = as_array(features)
        if self.parameters.get('constant') is not None:
            return np.full(len(x), float(self.parameters['constant']))
        return sigmoid(x @ self.parameters['w'] + self.parameters['b'])


def logreg_loss(params, x, y, l2):
    '''Mean binary cross-entropy + l2/2 |w|^2; params = [w, b]'''
    w, b = params
    z = x @ w + b
    loss = np.mean(softplus(z) - y * z) + 0.5 * l2 * np.dot(w, w)
    residual = (sigmoid(z) - y) / len(y)
    return loss, [x.T @ residual + l2 * w, np.array(np.sum(residual))]


def _fit_logistic(x, y, l2, epochs, lr):
    params = [np.zeros(x.shape[1]), np.array(0.0)]
    for epoch in range(epochs):
        loss, grads = logreg_loss(params, x, y, l2)
        params[0] -= lr * grads[0]
        params[1] = params[1] - lr * grads[1]
    return params[0], float(params[1])


def train_logreg(features, labels, l2=None, epochs=None, lr=None, seed=0):
    '''Logistic regression by full-batch gradient descent from zero weights

    A single-class training set gives a model that predicts the class prior.
    '''
    cfg = get_setting('LOGREG')
    l2 = cfg['l2'] if l2 is None else l2
    epochs = cfg['epochs'] if epochs is None else epochs
    lr = cfg['learning_rate'] if lr is None else lr
    if l2 < 0:
        raise ClassifyError('l2 must be >= 0')
    x, y = _check_inputs(features, labels)
    hyperparameters = {'l2': l2, 'epochs': epochs, 'learning_rate': lr}

    if len(np.unique(y)) < 2:
        log.warning('logreg trained on a single class; predicting the class prior')
        return LogRegModel(hyperparameters, seed, {'w': np.zeros(x.shape[1]), 'b': 0.0,
                                                   'constant': float(y.mean())})
    w, b = _fit_logistic(x, y, l2, epochs, lr)
    return LogRegModel(hyperparameters, seed, {'w': w, 'b': b, 'constant': None})


class LinearSvmModel(ClassifierModel):
    '''Linear SVM; probabilities come from a logistic link fitted on training margins'''
    def __init__(self, hyperparameters, seed, parameters):
        super(LinearSvmModel, self).__init__('linear_svm', hyperparameters, seed, parameters)

    @staticmethod
    def load_parameters(data):
        data = dict(data)
        data['w'] = np.array(data['w'], dtype=np.float64)
        return data

    def decision_function(self, features):
        return as_array(features) @ self.parameters['w'] + self.parameters['b']

    def predict(self, features):
        return (self.decision_function(features) > 0).astype(np.int64)

    def _proba(self, features):
        margins = self.decision_function(features)
        if self.parameters.get('constant') is not None:
            return np.full(len(margins), float(self.parameters['constant']))
        return sigmoid(self.parameters['link_a'] * margins + self.parameters['link_b'])


def hinge_objective(w, b, x, signs, c):
    '''Soft-margin objective 1/2 |w|^2 + c * sum of hinge losses'''
    return 0.5 * np.dot(w, w) + c * np.sum(np.maximum(0.0, 1.0 - signs * (x @ w + b)))


def train_linear_svm(features, labels, c=None, epochs=None, lr=None, seed=0):
    '''Soft-margin linear SVM by full-batch subgradient descent

    Minimises :func:`hinge_objective` through its per-sample form
    lam/2 |w|^2 + mean hinge with lam = 1 / (c * n), which has the same
    minimiser. Step sizes decay as lr / sqrt(1 + t), capped at 1 / lam; the best
    iterate is kept.
    '''
    cfg = get_setting('LINEAR_SVM')
    c = cfg['c'] if c is None else c
    epochs = cfg['epochs'] if epochs is None else epochs
    lr = cfg['learning_rate'] if lr is None else lr
    if not c > 0:
        raise ClassifyError('c must be positive')
    x, y = _check_inputs(features, labels)
    hyperparameters = {'c': c, 'epochs': epochs, 'learning_rate': lr}
    signs = 2.0 * y - 1.0
    lam = 1.0 / (c * len(y))

    w, b = np.zeros(x.shape[1]), 0.0
    best = (hinge_objective(w, b, x, signs, c), w.copy(), b)
    for epoch in range(epochs):
        violated = signs * (x @ w + b) < 1.0
        grad_w = lam * w - (signs[violated] @ x[violated]) / len(y)
        grad_b = -np.sum(signs[violated]) / len(y)
        step = min(lr / np.sqrt(1.0 + epoch), 1.0 / lam)
        w = w - step * grad_w
        b = b - step * grad_b
        objective = hinge_objective(w, b, x, signs, c)
        if objective < best[0]:
            best = (objective, w.copy(), b)
    w, b = best[1], float(best[2])

    parameters = {'w': w, 'b': b, 'link_a': 1.0, 'link_b': 0.0, 'constant': None}
    if len(np.unique(y)) < 2:
        log.warning('linear_svm trained on a single class; predicting the class prior')
        parameters['constant'] = float(y.mean())
    else:
        link = train_logreg((x @ w + b)[:, None], y, l2=0.0)
        parameters['link_a'] = float(link.parameters['w'][0])
        parameters['link_b'] = float(link.parameters['b'])
    return LinearSvmModel(hyperparameters, seed, parameters)


class RandomForestModel(ClassifierModel):
    '''Forest of flattened trees: per tree, node arrays left/right/feature/threshold/value

    ``value`` holds the class-1 fraction at each node; leaves have left == -1.
    '''
    def __init__(self, hyperparameters, seed, parameters):
        super(RandomForestModel, self).__init__('random_forest', hyperparameters, seed,
                                                parameters)

    @staticmethod
    def load_parameters(data):
        trees = []
        for tree in data['trees']:
            trees.append({
                'left': np.array(tree['left'], dtype=np.int64),
                'right': np.array(tree['right'], dtype=np.int64),
                'feature': np.array(tree['feature'], dtype=np.int64),
                'threshold': np.array(tree['threshold'], dtype=np.float64),
                'value': np.array(tree['value'], dtype=np.float64),
            })
        return {'trees': trees}

    def to_dict(self):
        data = super(RandomForestModel, self).to_dict()
        data['parameters'] = {'trees': [dict((k, v.tolist()) for k, v in tree.items())
                                        for tree in self.parameters['trees']]}
        return data

    def _proba(self, features):
        # Trees split on float32 copies of the inputs.
        x = as_array(features).astype(np.float32)
        rows = np.arange(len(x))
        total = np.zeros(len(x))
        for tree in self.parameters['trees']:
            node = np.zeros(len(x), dtype=np.int64)
            active = tree['left'][node] >= 0
            while active.any():
                current = node[active]
                go_left = x[rows[active], tree['feature'][current]] <= tree['threshold'][current]
                node[active] = np.where(go_left, tree['left'][current], tree['right'][current])
                active = tree['left'][node] >= 0
            total += tree['value'][node]
        return total / len(self.parameters['trees'])


def _flatten_tree(estimator, classes):
    tree = estimator.tree_
    counts = tree.value[:, 0, :]
    sums = counts.sum(axis=1)
    if len(classes) == 2:
        value = counts[:, 1] / np.where(sums > 0, sums, 1.0)
    else:
        value = np.full(tree.node_count, float(classes[0]))
    return {
        'left': np.asarray(tree.children_left, dtype=np.int64),
        'right': np.asarray(tree.children_right, dtype=np.int64),
        'feature': np.maximum(np.asarray(tree.feature, dtype=np.int64), 0),
        'threshold': np.asarray(tree.threshold, dtype=np.float64),
        'value': value,
    }


def train_random_forest(features, labels, n_trees=None, max_depth=None, seed=0,
                        bootstrap=None):
    '''Random forest: Gini splits over sqrt(m) candidate features, bootstrap per tree'''
    cfg = get_setting('RANDOM_FOREST')
    n_trees = cfg['n_trees'] if n_trees is None else n_trees
    max_depth = cfg['max_depth'] if max_depth is None else max_depth
    bootstrap = cfg['bootstrap'] if bootstrap is None else bootstrap
    x, y = _check_inputs(features, labels)
    if len(x) < 2:
        raise ClassifyError('random forest needs at least 2 samples')

    forest = RandomForestClassifier(n_estimators=n_trees, criterion='gini', max_depth=max_depth,
                                    max_features='sqrt', bootstrap=bootstrap,
                                    random_state=seed, n_jobs=1)
    forest.fit(x, y)
    classes = forest.classes_.tolist()
    trees = [_flatten_tree(estimator, classes) for estimator in forest.estimators_]
    hyperparameters = {'n_trees': n_trees, 'max_depth': max_depth, 'bootstrap': bootstrap}
    return RandomForestModel(hyperparameters, seed, {'trees': trees})


TRAINERS = {
    'logreg': train_logreg,
    'linear_svm': train_linear_svm,
    'random_forest': train_random_forest,
}


def train_classifier(kind, features, labels, seed=0, hyperparameters=None):
    '''Trains ``kind`` with settings defaults updated by ``hyperparameters``'''
    if kind not in TRAINERS:
        raise ClassifyError('unknown classifier: {0}'.format(kind))
    hp = dict(hyperparameters or {})
    if kind == 'logreg':
        cfg = get_setting('LOGREG', hp)
        return train_logreg(features, labels, cfg['l2'], cfg['epochs'], cfg['learning_rate'],
                            seed)
    elif kind == 'linear_svm':
        cfg = get_setting('LINEAR_SVM', hp)
        return train_linear_svm(features, labels, cfg['c'], cfg['epochs'],
                                cfg['learning_rate'], seed)
    cfg = get_setting('RANDOM_FOREST', hp)
    return train_random_forest(features, labels, cfg['n_trees'], cfg['max_depth'], seed,
                               cfg['bootstrap'])
