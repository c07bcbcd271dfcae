import os

import simplejson

from revertgraph.analysis.pipeline import ExperimentReport
from revertgraph.cli import dispatch
from revertgraph.results import ReportStore

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'data')
MINI_REPO = os.path.join(DATA_DIR, 'mini_repo')
MINI_COMMITS = os.path.join(DATA_DIR, 'mini_commits.jsonl')
MINI_REPO_EDGES = [[0, 1], [0, 6], [0, 13], [1, 2], [1, 3], [1, 5], [1, 6], [1, 10], [1, 12],
                   [2, 3], [2, 4], [2, 6], [2, 9], [3, 5], [4, 5], [4, 10], [6, 12], [7, 9],
                   [8, 9], [11, 12]]


def read_bytes(root):
    files = {}
    for dirpath, dirnames, filenames in os.walk(root):
        for name in filenames:
            path = os.path.join(dirpath, name)
            with open(path, 'rb') as f:
                files[os.path.relpath(path, root)] = f.read()
    return files


class TestUsage:
    def test_1_no_arguments(self, capsys):
        assert dispatch([]) == 1

    def test_2_unknown_subcommand(self, capsys):
        assert dispatch(['frobnicate']) == 1

    def test_3_help(self, capsys):
        assert dispatch(['--help']) == 0
        assert 'extract' in capsys.readouterr().out

    def test_4_missing_config_is_data_error(self, capsys):
        assert dispatch(['run', '--config', 'missing.json']) == 2
        assert 'missing.json' in capsys.readouterr().err


class TestExtract:
    def test_1_exact_edges(self, capsys):
        assert dispatch(['extract', MINI_REPO]) == 0
        graph = simplejson.loads(capsys.readouterr().out)
        assert graph['edges'] == MINI_REPO_EDGES
        assert graph['nodes'][0] == 'app/__init__.py'

    def test_2_csv_to_file(self, tmp_path, capsys):
        output = str(tmp_path / 'edges.csv')
        assert dispatch(['extract', MINI_REPO, '--format', 'csv', '-o', output]) == 0
        with open(output) as f:
            lines = f.read().splitlines()
        assert lines[0] == 'source,target'
        assert len(lines) == 21

    def test_3_exclude(self, capsys):
        assert dispatch(['extract', MINI_REPO, '--exclude', 'lib/*', 'qa/*']) == 0
        graph = simplejson.loads(capsys.readouterr().out)
        assert len(graph['nodes']) == 10


class TestFeaturize:
    def test_1_from_repository(self, tmp_path, capsys):
        output = str(tmp_path / 'features.csv')
        assert dispatch(['featurize', MINI_REPO, MINI_COMMITS, '-o', output]) == 0
        with open(output) as f:
            lines = f.read().splitlines()
        assert lines[0].startswith('path,revert_freq_30d,')
        assert lines[0].endswith(',label')
        assert len(lines) == 15
        fields = lines[7].split(',')
        assert fields[0] == 'app/views.py'
        assert float(fields[1]) == 1.0
        assert fields[-1] == '1'

    def test_2_from_graph_file_then_iv(self, tmp_path, capsys):
        graph = str(tmp_path / 'graph.json')
        features = str(tmp_path / 'features.csv')
        assert dispatch(['extract', MINI_REPO, '-o', graph]) == 0
        assert dispatch(['featurize', graph, MINI_COMMITS, '--repo', MINI_REPO,
                         '-o', features]) == 0
        capsys.readouterr()
        assert dispatch(['iv', features, '--bins', '2', '--format', 'csv']) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == 'feature,iv'
        assert lines[1].startswith('revert_freq_30d,')

    def test_3_missing_commit_log(self, capsys):
        assert dispatch(['featurize', MINI_REPO, 'nowhere.jsonl']) == 2


class TestSynth:
    def test_1_same_seed_byte_identical(self, tmp_path, capsys):
        first, second = str(tmp_path / 'a'), str(tmp_path / 'b')
        args = ['--seed', '1', '--n-nodes', '40', '--positive-rate', '0.2']
        assert dispatch(['synth', '-o', first] + args) == 0
        assert dispatch(['synth', '-o', second] + args) == 0
        assert read_bytes(first) == read_bytes(second)

    def test_2_invalid_parameters(self, tmp_path, capsys):
        assert dispatch(['synth', '-o', str(tmp_path), '--n-nodes', '5']) == 2


class TestGradcheck:
    def test_1_passes(self, capsys):
        assert dispatch(['gradcheck', '--seed', '0', '--format', 'csv']) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == 'check,max_rel_error,passed'
        assert len(lines) == 7


class TestRunAndReport:
    def test_1_run_writes_reports(self, tmp_path, capsys):
        config = str(tmp_path / 'config.json')
        with open(config, 'w') as f:
            simplejson.dump({'dataset': {'synth': {'n_nodes': 60, 'positive_rate': 0.2}},
                             'strategies': [1], 'models': ['logreg'], 'seeds': [0]}, f)
        output = str(tmp_path / 'out')
        assert dispatch(['run', '--config', config, '-o', output, '--format', 'json']) == 0
        reports = [simplejson.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert len(reports) == 1
        assert reports[0]['model'] == 'logreg'
        assert os.path.exists(os.path.join(output, 'reports.jsonl'))

    def test_2_seed_flag_replaces_config_seeds(self, tmp_path, capsys):
        config = str(tmp_path / 'config.json')
        with open(config, 'w') as f:
            simplejson.dump({'dataset': {'synth': {'n_nodes': 60, 'positive_rate': 0.2}},
                             'strategies': [1], 'models': ['logreg'], 'seeds': [0, 1, 2]}, f)
        assert dispatch(['run', '--config', config, '--seed', '4', '--format', 'json']) == 0
        reports = [simplejson.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert [r['seed'] for r in reports] == [4]

    def test_3_invalid_config(self, tmp_path, capsys):
        config = str(tmp_path / 'config.json')
        with open(config, 'w') as f:
            simplejson.dump({'strategies': [1]}, f)
        assert dispatch(['run', '--config', config]) == 2
        assert 'dataset' in capsys.readouterr().err

    def test_4_report(self, tmp_path, capsys):
        store = ReportStore(str(tmp_path))
        for seed, auc in ((0, 0.5), (1, 0.75)):
            store.add_report(ExperimentReport(1, 'raw', 'logreg', 'none', seed, auc, 0.5,
                                              {'tn': 5, 'fp': 2, 'fn': 1, 'tp': 2}, 30, 10,
                                              '{0:016d}'.format(seed)))
        assert dispatch(['report', str(tmp_path), '--metric', 'auc_roc',
                         '--format', 'csv']) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == 'metric,family,method,raw'
        assert lines[1] == 'auc_roc,Regular classification,LR,0.625'

    def test_5_missing_reports(self, capsys):
        assert dispatch(['report', 'no-such-dir']) == 2
