'''Renders experiment reports as results grids.

Rows are (model family, method), columns are representations; each cell is the
mean of a metric over seeds. Strategy 3 runs use raw features and so fill the
``raw`` column only.
'''
import os

import pandas as pd

from revertgraph.analysis.pipeline import REPRESENTATIONS

FAMILIES = {
    (1, False): 'Regular classification',
    (1, True): 'Imbalanced classification',
    (2, False): 'Anomaly detection',
    (3, False): 'GNN',
    (3, True): 'GNN',
}
MODEL_NAMES = {
    'logreg': 'LR',
    'linear_svm': 'SVM',
    'random_forest': 'RF',
    'lof': 'LOF',
    'iforest': 'IF',
    'ocsvm': 'OCSVM',
    'dominant': 'Dominant',
    'gcn': 'GCN',
}
RESAMPLER_NAMES = {
    'up': 'Up',
    'down': 'Down',
    'smote': 'SMOTE',
    'upsample': 'Upsampling',
    'downsample': 'Downsampling',
}
METRICS = ('auc_roc', 'macro_f1')


def method_label(report):
    '''Human readable row label, e.g. "SMOTE + LR" or "Downsampling + GCN"'''
    if report.resampler == 'graphsmote':
        return 'GraphSMOTE'
    model = MODEL_NAMES.get(report.model, report.model)
    if report.resampler in RESAMPLER_NAMES:
        return '{0} + {1}'.format(RESAMPLER_NAMES[report.resampler], model)
    return model


def reports_frame(reports):
    rows = []
    for report in reports:
        row = report.to_dict(timestamps=False)
        row['family'] = FAMILIES[(report.strategy, report.resampler != 'none')]
        row['method'] = method_label(report)
        rows.append(row)
    return pd.DataFrame(rows)


def metric_table(reports, metric='auc_roc'):
    '''Pivot of ``metric`` averaged over seeds: index (family, method), one column per
    representation present in the reports'''
    if metric not in METRICS:
        raise ValueError('unknown metric: {0}'.format(metric))
    frame = reports_frame(reports)
    if frame.empty:
        return pd.DataFrame()
    table = frame.pivot_table(index=['family', 'method'], columns='representation',
                              values=metric, aggfunc='mean', sort=False)
    columns = [r for r in REPRESENTATIONS if r in table.columns]
    return table[columns]


def render_table(reports, metric='auc_roc'):
    table = metric_table(reports, metric)
    if table.empty:
        return '(no reports)\n'
    title = {'auc_roc': 'AUC-ROC', 'macro_f1': 'Macro F1'}[metric]
    return '{0}\n{1}\n'.format(title, table.to_string(float_format=lambda v: '{0:.4f}'.format(v),
                                                      na_rep='-'))


def write_tables(reports, output_dir):
    paths = []
    for metric, filename in (('auc_roc', 'auc_table.txt'), ('macro_f1', 'f1_table.txt')):
        path = os.path.join(output_dir, filename)
        with open(path, 'w') as f:
            f.write(render_table(reports, metric))
        paths.append(path)
    return paths
