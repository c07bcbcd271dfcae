import os
import sys
import datetime as dt

from revertgraph.analysis.pipeline import run_matrix
from revertgraph.analysis.report_table import render_table

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                          'configs')
CONFIGS = ['classification_matrix.json', 'anomaly_matrix.json', 'gnn_comparison.json']


def run_benchmark(output_dir='benchmark_output', jobs=1):
    '''Runs the three standard matrices on the default synthetic benchmark'''
    for name in CONFIGS:
        start = dt.datetime.now()
        target = os.path.join(output_dir, os.path.splitext(name)[0])
        reports = run_matrix(os.path.join(CONFIG_DIR, name), target, jobs)
        print(render_table(reports, 'auc_roc'))
        print(render_table(reports, 'macro_f1'))
        print('{0}: {1} reports in {2}'.format(name, len(reports), dt.datetime.now() - start))


if __name__ == '__main__':
    run_benchmark(*sys.argv[1:2], jobs=int(sys.argv[2]) if len(sys.argv) > 2 else 1)
