import os

# Directories where data and output will be saved.
SETTINGS_DIR = os.path.abspath(os.path.dirname(__file__))
DATA_DIR = os.path.expandvars('$HOME/revertgraph_data/data')
OUTPUT_DIR = os.path.expandvars('$HOME/revertgraph_data/output')
# Set to a directory name to also log to <LOGGING_DIR>/revertgraph.log.
LOGGING_DIR = None

CONSOLE_LOG_LEVEL = 'info'
FILE_LOG_LEVEL = 'debug'

# Only files with these suffixes become graph nodes.
SOURCE_SUFFIXES = ('.py',)
EXCLUDE_GLOBS = ()

# Stratified train/test split.
SPLIT_RATIO = 0.8

# Equal-frequency bins for Information Value.
IV_BINS = 10

# Models whose AUC is taken from hard predictions when trained without resampling.
LABEL_SCORED_MODELS = ('linear_svm', 'random_forest', 'gcn')

NODE2VEC = {
    'p': 1.0,
    'q': 1.0,
    'walk_length': 20,
    'walks_per_node': 10,
    'window': 5,
    'dim': 16,
    'negatives': 5,
    'epochs': 1,
    'learning_rate': 0.025,
    'batch_size': 1024,
}

GCN = {
    'hidden_dim': 16,
    'epochs': 200,
    'learning_rate': 0.01,
    'weight_decay': 5e-4,
    'class_weights': False,
    'init': 'glorot',
}

GAE = {
    'hidden_dim': 32,
    'dim': 16,
    'epochs': 200,
    'learning_rate': 0.01,
    'weight_decay': 0.0,
    'init': 'glorot',
}

DOMINANT = {
    'alpha': 0.5,
    'hidden_dim': 16,
    'epochs': 100,
    'learning_rate': 0.01,
}

GRAPHSMOTE = {
    'hidden_dim': 16,
    'encoder_epochs': 100,
    'edge_epochs': 100,
    'learning_rate': 0.01,
    'k': 5,
    'edge_threshold': 0.5,
}

LOGREG = {
    'l2': 1e-3,
    'epochs': 500,
    'learning_rate': 0.5,
}

LINEAR_SVM = {
    'c': 1.0,
    'epochs': 500,
    'learning_rate': 0.1,
}

RANDOM_FOREST = {
    'n_trees': 100,
    'max_depth': None,
    'bootstrap': True,
}

SMOTE = {
    'k': 5,
}

LOF = {
    'k': 20,
}

IFOREST = {
    'n_trees': 100,
    'subsample_size': 256,
}

OCSVM = {
    'nu': 0.05,
    'gamma': None,
    'tol': 1e-4,
    'max_iter': 100000,
}

SYNTH = {
    'n_nodes': 2000,
    'attachment': 2,
    'n_communities': 8,
    'mixing': 0.1,
    'positive_rate': 0.04,
    # Proportional to the feature Information Values reported for the industrial data.
    'beta': [0.570, 0.326, 0.188, 0.151, 0.100, 0.082, 0.063, 0.014],
    'signal_scale': 2.0,
    'contagion': 0.5,
}
