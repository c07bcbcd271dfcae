from .version import __version__
try:
    from .codegraph import CodeGraph, build_code_graph
    from .history import FeatureMatrix, LabelSet, compute_features, label_reverts
    __all__ = [
        '__version__',
        'CodeGraph',
        'build_code_graph',
        'FeatureMatrix',
        'LabelSet',
        'compute_features',
        'label_reverts',
    ]
except (ImportError, OSError):
    # This can be called on installation, when numpy et al. won't be installed.
    # Handle import errors and just expose __version__.
    __all__ = [
        '__version__',
    ]
