import os
import threading

import simplejson

from revertgraph.load_settings import settings
from revertgraph.errors import RevertGraphError
from revertgraph.utils.utils import ensure_dir

REPORTS_FILE = 'reports.jsonl'
SKIPPED_FILE = 'skipped.jsonl'


class ReportNotFound(RevertGraphError):
    '''Simple exception thrown if a report cannot be found in the report store'''
    pass


class ReportStore(object):
    '''Append-only store of experiment reports

    One JSON line per report in <output_dir>/reports.jsonl; appends are
    serialised with a lock. Defaults to settings.OUTPUT_DIR.
    '''
    def __init__(self, output_dir=None):
        if output_dir:
            self.output_dir = output_dir
        else:
            self.output_dir = settings.OUTPUT_DIR
        self.path = os.path.join(self.output_dir, REPORTS_FILE)
        self._lock = threading.Lock()

    def add_report(self, report):
        '''Appends a report (ExperimentReport or dict)'''
        line = report.to_json() if hasattr(report, 'to_json') else \
            simplejson.dumps(report, sort_keys=True)
        with self._lock:
            ensure_dir(self.output_dir)
            with open(self.path, 'a') as f:
                f.write(line)
                f.write('\n')

    def clear(self):
        '''Removes all stored reports (use with caution!)'''
        with self._lock:
            if os.path.exists(self.path):
                os.remove(self.path)

    def list_reports(self):
        '''All stored reports, in the order they were added'''
        from revertgraph.analysis.pipeline import ExperimentReport
        return [ExperimentReport.from_dict(data) for data in self._read()]

    def _read(self):
        if not os.path.exists(self.path):
            return []
        with open(self.path, 'r') as f:
            return [simplejson.loads(line) for line in f if line.strip()]

    def list_hashes(self):
        return sorted(set(data['config_hash'] for data in self._read()))

    def get_report(self, hash_value):
        '''Returns the first report with config hash ``hash_value``'''
        for report in self.list_reports():
            if report.config_hash == hash_value:
                return report
        raise ReportNotFound('no report with config hash {0} in {1}'.format(
            hash_value, self.path))

    def write_skipped(self, skipped):
        ensure_dir(self.output_dir)
        with open(os.path.join(self.output_dir, SKIPPED_FILE), 'w') as f:
            for row in skipped:
                f.write(simplejson.dumps(row))
                f.write('\n')


def load_reports(path):
    '''Loads reports from a JSON-lines file (or a directory holding reports.jsonl)'''
    if os.path.isdir(path):
        return ReportStore(path).list_reports()
    if not os.path.exists(path):
        raise ReportNotFound('no reports file: {0}'.format(path))
    store = ReportStore(os.path.dirname(path) or '.')
    store.path = path
    return store.list_reports()
