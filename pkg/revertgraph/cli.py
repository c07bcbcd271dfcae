'''Command line interface: ``revertgraph <subcommand> ...``

Data goes to ``-o/--output`` (or stdout when no output is given); progress and
errors go to stderr. Exit codes: 0 success, 1 usage error, 2 data error.
``-v/--verbose`` and ``-q/--quiet`` set the console log level.
'''
import os
import sys

import argh
import numpy as np
import pandas as pd
import simplejson
from termcolor import cprint as _cprint

from revertgraph import setup_logging
from revertgraph.codegraph import CodeGraph, build_code_graph, load_file_map
from revertgraph.errors import RevertGraphError
from revertgraph.history import (FeatureMatrix, compute_features, iv_table, label_reverts,
                                 load_commit_log, load_overrides)
from revertgraph.load_settings import settings
from revertgraph.version import __version__

log = setup_logging.get_logger('rg.cli')

FORMATS = ('json', 'csv', 'table')


class CliError(RevertGraphError):
    pass


def cprint(text, color=None, on_color=None, attrs=None, **kwargs):
    log.debug(text)
    kwargs.setdefault('file', sys.stderr)
    _cprint(text, color, on_color, attrs, **kwargs)


def _require(*paths):
    for path in paths:
        if path is not None and not os.path.exists(path):
            raise CliError('no such file or directory: {0}'.format(path))


def _resolve_seed(seed):
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2 ** 31))
        log.info('no --seed given, using random seed {0}'.format(seed))
    return seed


def _emit(text, output=None):
    if output:
        parent = os.path.dirname(output)
        if parent and not os.path.isdir(parent):
            os.makedirs(parent)
        with open(output, 'w') as f:
            f.write(text)
        cprint('wrote {0}'.format(output), 'green')
    else:
        sys.stdout.write(text)


def _render_frame(frame, format):
    if format == 'csv':
        return frame.to_csv(index=False)
    if format == 'json':
        return simplejson.dumps(frame.to_dict(orient='records'), indent=2) + '\n'
    return frame.to_string(index=False) + '\n'


@argh.arg('source', help='repository directory or JSON file map')
@argh.arg('-o', '--output', help='file to write (default stdout)')
@argh.arg('--exclude', nargs='*', help='glob patterns of files to leave out')
@argh.arg('--format', choices=FORMATS)
def extract(source, *, output=None, exclude=None, format='json'):
    '''Builds the import graph of a repository'''
    _require(source)
    exclude = tuple(exclude if exclude is not None else settings.EXCLUDE_GLOBS)
    graph = build_code_graph(load_file_map(source, exclude, settings.SOURCE_SUFFIXES))
    for warning in graph.warnings:
        cprint(warning, 'yellow')
    if format == 'json':
        text = graph.to_json() + '\n'
    else:
        frame = pd.DataFrame([(graph.node_paths[i], graph.node_paths[j]) for i, j in graph.edges],
                             columns=['source', 'target'])
        text = _render_frame(frame, format)
    cprint('{0} files, {1} import edges'.format(graph.n, len(graph.edges)), 'green')
    _emit(text, output)


@argh.arg('graph', help='graph JSON written by extract, or a repository directory')
@argh.arg('commits', help='JSON-lines commit log')
@argh.arg('--repo', help='repository directory or file map supplying sources for complexity')
@argh.arg('--cutoff', type=int, help='feature cutoff, UTC seconds (default: last commit)')
@argh.arg('--label-since', type=int, help='only reverts after this time become labels')
@argh.arg('--overrides', help='JSON object path -> 0|1 overriding derived labels')
@argh.arg('-o', '--output', help='file to write (default stdout)')
@argh.arg('--exclude', nargs='*', help='glob patterns of files to leave out')
@argh.arg('--format', choices=FORMATS)
def featurize(graph, commits, *, repo=None, cutoff=None, label_since=None, overrides=None,
              output=None, exclude=None, format='csv'):
    '''Computes the per-file feature matrix plus a label column'''
    _require(graph, commits, repo, overrides)
    exclude = tuple(exclude if exclude is not None else settings.EXCLUDE_GLOBS)
    sources = {}
    if os.path.isdir(graph):
        sources = load_file_map(graph, exclude, settings.SOURCE_SUFFIXES)
        code_graph = build_code_graph(sources)
    else:
        code_graph = CodeGraph.load(graph)
        if repo is not None:
            sources = load_file_map(repo, exclude, settings.SOURCE_SUFFIXES)

    log_records = load_commit_log(commits)
    if cutoff is None:
        if not log_records:
            raise CliError('{0}: empty commit log and no --cutoff'.format(commits))
        cutoff = max(c.commit_ts for c in log_records)
    elif label_since is None:
        label_since = cutoff
    features = compute_features(log_records, code_graph, sources, cutoff)
    labels = label_reverts(log_records, code_graph.node_paths,
                           load_overrides(overrides) if overrides else None,
                           since_ts=label_since)
    for warning in labels.warnings:
        cprint(warning, 'yellow')

    frame = features.to_dataframe(labels)
    frame.insert(0, 'path', list(code_graph.node_paths))
    cprint('{0} files, {1} reverted'.format(labels.n, labels.class_counts()[1]), 'green')
    _emit(_render_frame(frame, format), output)


def _read_features(path):
    frame = pd.read_csv(path)
    if 'path' in frame.columns:
        frame = frame.drop(columns=['path'])
    if 'label' not in frame.columns:
        raise CliError('{0}: no label column'.format(path))
    labels = frame.pop('label').values
    return FeatureMatrix(frame.values, list(frame.columns)), labels


@argh.arg('features', help='features CSV with a label column (written by featurize)')
@argh.arg('--bins', type=int, help='equal-frequency bins (default settings.IV_BINS)')
@argh.arg('-o', '--output', help='file to write (default stdout)')
@argh.arg('--format', choices=FORMATS)
def iv(features, *, bins=None, output=None, format='table'):
    '''Ranks features by Information Value'''
    _require(features)
    matrix, labels = _read_features(features)
    table = iv_table(matrix, labels, bins or settings.IV_BINS)
    _emit(_render_frame(table, format), output)


@argh.arg('-o', '--output', required=True, help='dataset directory to write')
@argh.arg('--config', help='JSON object of generator parameters')
@argh.arg('--seed', type=int)
@argh.arg('--n-nodes', type=int)
@argh.arg('--positive-rate', type=float)
def synth(*, output=None, config=None, seed=None, n_nodes=None, positive_rate=None):
    '''Generates a synthetic repository, commit log and planted labels'''
    from revertgraph.synth import SynthConfig, generate_synthetic_dataset

    _require(config)
    params = {}
    if config:
        with open(config, 'r') as f:
            params = simplejson.load(f)
        if not isinstance(params, dict):
            raise CliError('{0}: expected a JSON object'.format(config))
    if n_nodes is not None:
        params['n_nodes'] = n_nodes
    if positive_rate is not None:
        params['positive_rate'] = positive_rate
    params['seed'] = _resolve_seed(seed if seed is not None else params.get('seed'))

    dataset = generate_synthetic_dataset(SynthConfig.from_dict(params))
    dataset.write(output)
    cprint('wrote {0} files and {1} commits to {2} (positive rate {3:.4f})'.format(
        len(dataset.file_map), len(dataset.commits), output, dataset.achieved_rate), 'green')


@argh.arg('--config', required=True, help='experiment config JSON')
@argh.arg('-o', '--output', help='directory for reports.jsonl and the tables')
@argh.arg('--seed', type=int, help='run this single seed instead of the config seeds')
@argh.arg('--jobs', type=int, help='worker processes')
@argh.arg('--format', choices=('json', 'table'))
def run(*, config=None, output=None, seed=None, jobs=1, format='table'):
    '''Runs an experiment matrix'''
    from revertgraph.analysis.pipeline import load_config, run_matrix
    from revertgraph.analysis.report_table import render_table

    _require(config)
    with open(config, 'r') as f:
        raw = simplejson.load(f)
    experiment = load_config(raw)
    if seed is not None or 'seeds' not in raw:
        experiment['seeds'] = [_resolve_seed(seed)]
    if jobs < 1:
        raise CliError('--jobs must be >= 1')

    reports = run_matrix(experiment, output, jobs)
    if format == 'json':
        text = ''.join(report.to_json() + '\n' for report in reports)
    else:
        text = render_table(reports, 'auc_roc') + '\n' + render_table(reports, 'macro_f1')
    sys.stdout.write(text)
    cprint('{0} experiments finished'.format(len(reports)), 'green')


@argh.arg('--epsilon', type=float)
@argh.arg('--seed', type=int)
@argh.arg('--format', choices=FORMATS)
def gradcheck(*, epsilon=1e-5, seed=None, format='table'):
    '''Checks every hand-written gradient against finite differences'''
    from revertgraph.analysis.gradcheck import TOLERANCE, failures, run_all

    results = run_all(epsilon, _resolve_seed(seed))
    frame = pd.DataFrame([(name, error, error < TOLERANCE) for name, error in results.items()],
                         columns=['check', 'max_rel_error', 'passed'])
    sys.stdout.write(_render_frame(frame, format))
    failed = failures(results)
    if failed:
        raise CliError('gradient check failed: {0}'.format(', '.join(failed)))
    cprint('all {0} gradient checks passed'.format(len(results)), 'green')


@argh.arg('reports', help='reports.jsonl, or a directory holding one')
@argh.arg('--metric', choices=('auc_roc', 'macro_f1'), help='default: both')
@argh.arg('-o', '--output', help='file to write (default stdout)')
@argh.arg('--format', choices=FORMATS)
def report(reports, *, metric=None, output=None, format='table'):
    '''Renders stored reports as results tables'''
    from revertgraph.analysis.report_table import metric_table, render_table
    from revertgraph.results import load_reports

    _require(reports)
    loaded = load_reports(reports)
    metrics = [metric] if metric else ['auc_roc', 'macro_f1']
    if format == 'table':
        text = '\n'.join(render_table(loaded, m) for m in metrics)
    else:
        frames = []
        for m in metrics:
            table = metric_table(loaded, m).reset_index()
            table.insert(0, 'metric', m)
            frames.append(table)
        text = _render_frame(pd.concat(frames, ignore_index=True), format)
    _emit(text, output)


COMMANDS = [extract, featurize, iv, synth, run, gradcheck, report]


def _pop_verbosity(argv):
    rest = []
    for arg in argv:
        if arg in ('-v', '--verbose'):
            setup_logging.set_console_level('debug')
        elif arg in ('-q', '--quiet'):
            setup_logging.set_console_level('warning')
        else:
            rest.append(arg)
    return rest


def build_parser():
    parser = argh.ArghParser(prog='revertgraph',
                             description='Code revert prediction on import graphs '
                                         '(version {0})'.format(__version__))
    argh.add_commands(parser, COMMANDS)
    return parser


def dispatch(argv=None):
    '''Parses ``argv``, runs one subcommand and returns the exit code'''
    argv = _pop_verbosity(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        parser.parse_args(argv)
    except SystemExit as e:
        return 0 if not e.code else 1
    try:
        argh.dispatch(parser, argv=argv)
    except (RevertGraphError, IOError, OSError, simplejson.JSONDecodeError,
            pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        cprint('error: {0}'.format(e), 'red', attrs=['bold'])
        log.debug('command failed', exc_info=True)
        return 2
    return 0


def main():
    sys.exit(dispatch())
