'''Evaluation metrics: rank-based AUC-ROC, macro F1 and confusion counts.'''
import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import confusion_matrix, f1_score

from revertgraph.errors import RevertGraphError


class MetricError(RevertGraphError):
    pass


def auc_roc(scores, labels):
    '''Mann-Whitney AUC with midranks for ties

    AUC = (sum of positive ranks - n+(n+ + 1)/2) / (n+ n-); constant scores give 0.5.
    '''
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricError('AUC undefined for a single class')
    ranks = rankdata(scores, method='average')
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def macro_f1(predictions, labels):
    '''Unweighted mean of the per-class F1 scores (0/0 counts as 0)'''
    return float(f1_score(np.asarray(labels, dtype=np.int64),
                          np.asarray(predictions, dtype=np.int64),
                          labels=[0, 1], average='macro', zero_division=0))


def confusion_counts(predictions, labels):
    '''Returns dict tn, fp, fn, tp'''
    tn, fp, fn, tp = confusion_matrix(np.asarray(labels, dtype=np.int64),
                                      np.asarray(predictions, dtype=np.int64),
                                      labels=[0, 1]).ravel()
    return {'tn': int(tn), 'fp': int(fp), 'fn': int(fn), 'tp': int(tp)}
