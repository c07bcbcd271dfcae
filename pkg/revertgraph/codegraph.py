'''Static import graph extraction.

Builds an undirected, module-level import graph from a source tree without
executing (or even parsing) any of the code: import statements are found by
line-level tokenization and resolved against the repository's own modules.
External imports are dropped, so the graph only covers in-repo scripts.
'''
import os
import re
import fnmatch
from collections import OrderedDict

import numpy as np
import simplejson

from revertgraph import setup_logging
from revertgraph.errors import RevertGraphError

log = setup_logging.get_logger('rg.codegraph')

IMPORT_RE = re.compile(r'^import\s+(.+)$')
FROM_RE = re.compile(r'^from\s+(\.*)\s*([\w.]*)\s+import\s*(.+)$')
DOTTED_NAME_RE = re.compile(r'^[A-Za-z_]\w*(\.[A-Za-z_]\w*)*$')
PACKAGE_MARKER = '__init__'


class CodeGraphError(RevertGraphError):
    '''Raised for an empty repository, bad node ids or a malformed graph file'''
    pass


class CodeGraph(object):
    '''Undirected import graph: one node per script, one edge per import relationship

    Node ids are dense (0..n-1) and follow the order of ``node_paths``, which
    :func:`build_code_graph` sorts lexicographically. Instances are immutable.

    :param node_paths: repository-relative file paths, one per node
    :param edges: iterable of node-id pairs, either orientation
    :param warnings: data problems recorded while building the graph
    '''
    def __init__(self, node_paths, edges, warnings=None):
        self.node_paths = tuple(node_paths)
        n = len(self.node_paths)

        normalised = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise CodeGraphError('self-loop on node {0}'.format(i))
            if not (0 <= i < n and 0 <= j < n):
                raise CodeGraphError('edge ({0}, {1}) out of range for {2} nodes'.format(i, j, n))
            normalised.add((min(i, j), max(i, j)))
        self.edges = tuple(sorted(normalised))

        adjacency = [[] for _ in range(n)]
        for i, j in self.edges:
            adjacency[i].append(j)
            adjacency[j].append(i)
        self.adjacency = tuple(tuple(sorted(neighbours)) for neighbours in adjacency)
        self.warnings = tuple(warnings or ())

    @property
    def n(self):
        return len(self.node_paths)

    def degree(self, node):
        '''Number of distinct in-repo modules related to ``node`` by an import'''
        if not 0 <= node < self.n:
            raise CodeGraphError('node {0} out of range for {1} nodes'.format(node, self.n))
        return len(self.adjacency[node])

    def degrees(self):
        return np.array([len(neighbours) for neighbours in self.adjacency], dtype=np.int64)

    def has_edge(self, i, j):
        return (min(i, j), max(i, j)) in self.edge_set()

    def edge_set(self):
        if not hasattr(self, '_edges_cache'):
            self._edges_cache = frozenset(self.edges)
        return self._edges_cache

    def subgraph(self, nodes):
        '''Returns the induced subgraph on ``nodes`` (kept in the given order)

        :returns: (CodeGraph, array mapping new node id -> old node id)
        '''
        nodes = [int(v) for v in nodes]
        old_to_new = dict((old, new) for new, old in enumerate(nodes))
        edges = [(old_to_new[i], old_to_new[j]) for i, j in self.edges
                 if i in old_to_new and j in old_to_new]
        paths = [self.node_paths[v] for v in nodes]
        return CodeGraph(paths, edges, self.warnings), np.array(nodes, dtype=np.int64)

    def to_dict(self):
        return OrderedDict([('nodes', list(self.node_paths)),
                            ('edges', [[i, j] for i, j in self.edges])])

    def to_json(self):
        return simplejson.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(data['nodes'], [tuple(edge) for edge in data['edges']])
        except (KeyError, TypeError, ValueError) as e:
            raise CodeGraphError('malformed graph document: {0}'.format(e))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(simplejson.loads(text))

    def save(self, path):
        with open(path, 'w') as f:
            f.write(self.to_json())
            f.write('\n')

    @classmethod
    def load(cls, path):
        with open(path, 'r') as f:
            return cls.from_json(f.read())


def degree(graph, node):
    '''Degree of ``node`` in ``graph``; supplies the "dependent modules" feature'''
    return graph.degree(node)


def module_name(path):
    '''Maps a repo-relative path to its dotted module name

    ``a/b/c.py`` -> ``a.b.c``; ``a/b/__init__.py`` -> ``a.b``
    '''
    parts = path.replace('\\', '/').split('/')
    parts[-1] = os.path.splitext(parts[-1])[0]
    if parts[-1] == PACKAGE_MARKER and len(parts) > 1:
        parts = parts[:-1]
    return '.'.join(parts)


def _relative_base(path):
    '''Dotted name relative imports in ``path`` resolve against

    Package markers keep their ``__init__`` segment, so one leading dot strips
    it and lands on the package itself.
    '''
    parts = path.replace('\\', '/').split('/')
    parts[-1] = os.path.splitext(parts[-1])[0]
    return '.'.join(parts)


def _logical_lines(source_text):
    '''Yields comment-stripped statements, joining parenthesised from-import continuations'''
    lines = source_text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].split('#', 1)[0].strip()
        i += 1
        if line.startswith('from') and '(' in line and ')' not in line:
            while i < len(lines) and ')' not in line:
                line += ' ' + lines[i].split('#', 1)[0].strip()
                i += 1
        for statement in line.split(';'):
            statement = statement.strip()
            if statement:
                yield statement


def _imported_names(clause):
    names = []
    for name in clause.replace('(', ' ').replace(')', ' ').split(','):
        name = name.strip()
        if not name:
            continue
        names.append(name.split()[0])
    return names


def _add_submodules(found, module, clause, repo_index):
    if not repo_index:
        return
    for name in _imported_names(clause):
        if name != '*' and DOTTED_NAME_RE.match(name):
            dotted = '{0}.{1}'.format(module, name)
            if dotted in repo_index:
                found[dotted] = None


def extract_imports(source_text, module_path, warnings=None, repo_index=None):
    '''Returns the dotted names of all statically visible imports in a script

    Only statements matching the import grammar are recognised (``import X.Y``,
    ``from X import ...``, ``from . import ...``); they are found anywhere in the
    file, including inside functions and conditionals. Relative imports are
    resolved lexically: each leading dot strips one trailing segment of
    ``module_path``. Duplicates are removed, keeping order of first appearance.

    :param source_text: raw content of one script (str, or bytes to be decoded)
    :param module_path: dotted name of the script relative to the repo root
    :param warnings: optional list that data problems are appended to
    :param repo_index: optional dotted name -> node id map; for
        ``from X import a`` the submodule ``X.a`` is reported as well when it
        is one of its keys
    :returns: list of dotted module names
    '''
    if warnings is None:
        warnings = []
    if isinstance(source_text, bytes):
        try:
            source_text = source_text.decode('utf-8')
        except UnicodeDecodeError:
            source_text = None
    if source_text is None:
        msg = 'could not decode {0}; kept as isolated node'.format(module_path)
        log.warning(msg)
        warnings.append(msg)
        return []

    found = OrderedDict()
    for statement in _logical_lines(source_text):
        match = IMPORT_RE.match(statement)
        if match:
            for name in _imported_names(match.group(1)):
                if DOTTED_NAME_RE.match(name):
                    found[name] = None
            continue

        match = FROM_RE.match(statement)
        if not match:
            continue
        dots, module, clause = match.groups()
        if module and not DOTTED_NAME_RE.match(module):
            continue
        if not dots:
            if module:
                found[module] = None
                _add_submodules(found, module, clause, repo_index)
            continue

        base = module_path.split('.')
        if len(dots) > len(base):
            msg = 'relative import {0}{1} escapes the repository in {2}'.format(
                dots, module, module_path)
            log.warning(msg)
            warnings.append(msg)
            continue
        base = base[:len(base) - len(dots)]
        if module:
            target = '.'.join(base + module.split('.'))
            found[target] = None
            _add_submodules(found, target, clause, repo_index)
        else:
            names = _imported_names(clause)
            if names == ['*']:
                if base:
                    found['.'.join(base)] = None
                continue
            for name in names:
                if DOTTED_NAME_RE.match(name):
                    found['.'.join(base + [name])] = None
    return list(found.keys())


def build_repo_index(node_paths, warnings=None):
    '''Maps dotted module names to node ids

    When several files map to the same dotted name the first path in
    lexicographic order wins and a warning is recorded.
    '''
    if warnings is None:
        warnings = []
    index = {}
    owners = {}
    for node_id, path in sorted(enumerate(node_paths), key=lambda item: item[1]):
        name = module_name(path)
        if name in index:
            msg = '{0} shadowed by {1} (both map to {2})'.format(path, owners[name], name)
            log.warning(msg)
            warnings.append(msg)
            continue
        index[name] = node_id
        owners[name] = path
    return index


def resolve_module(name, repo_index):
    '''Returns the node id of the longest in-repo prefix of ``name``, or None

    ``os.path`` resolves to None when no ``os`` module lives in the repository.
    '''
    parts = name.split('.')
    for i in range(len(parts), 0, -1):
        node_id = repo_index.get('.'.join(parts[:i]))
        if node_id is not None:
            return node_id
    return None


def _is_excluded(path, exclude):
    return any(fnmatch.fnmatch(path, pattern) for pattern in exclude)


def build_code_graph(file_map, exclude=()):
    '''Builds the undirected import graph of a repository

    :param file_map: dict of repo-relative path -> file content
    :param exclude: glob patterns of paths to leave out of the graph
    :returns: :class:`CodeGraph` with nodes in lexicographic path order
    '''
    if not file_map:
        raise CodeGraphError('empty repository')
    node_paths = sorted(path for path in file_map if not _is_excluded(path, exclude))
    if not node_paths:
        raise CodeGraphError('empty repository (all {0} files excluded)'.format(len(file_map)))

    warnings = []
    repo_index = build_repo_index(node_paths, warnings)

    edges = set()
    for i, path in enumerate(node_paths):
        for name in extract_imports(file_map[path], _relative_base(path), warnings,
                                    repo_index):
            j = resolve_module(name, repo_index)
            if j is None or j == i:
                continue
            edges.add((min(i, j), max(i, j)))

    graph = CodeGraph(node_paths, edges, warnings)
    log.debug('Built code graph: {0} nodes, {1} edges'.format(graph.n, len(graph.edges)))
    return graph


def read_source_tree(root, exclude=(), suffixes=('.py',)):
    '''Reads every source file below ``root`` into a file map

    Files that cannot be decoded as UTF-8 are kept as raw bytes so that they
    still become (isolated) nodes.

    :returns: OrderedDict of repo-relative path (``/`` separated) -> content
    '''
    if not os.path.isdir(root):
        raise CodeGraphError('not a directory: {0}'.format(root))
    file_map = OrderedDict()
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for filename in sorted(filenames):
            if suffixes and not filename.endswith(tuple(suffixes)):
                continue
            full_path = os.path.join(dirpath, filename)
            rel_path = os.path.relpath(full_path, root).replace(os.sep, '/')
            if _is_excluded(rel_path, exclude):
                continue
            with open(full_path, 'rb') as f:
                content = f.read()
            try:
                file_map[rel_path] = content.decode('utf-8')
            except UnicodeDecodeError:
                file_map[rel_path] = content
    return file_map


def load_file_map_json(path):
    '''Loads a ``{"files": {"<relative-path>": "<content>"}}`` document'''
    with open(path, 'r') as f:
        data = simplejson.load(f)
    try:
        return OrderedDict(sorted(data['files'].items()))
    except (KeyError, AttributeError):
        raise CodeGraphError('{0}: expected an object with a "files" map'.format(path))


def load_file_map(source, exclude=(), suffixes=('.py',)):
    '''Loads either a directory tree or a JSON file map'''
    if os.path.isdir(source):
        return read_source_tree(source, exclude, suffixes)
    file_map = load_file_map_json(source)
    return OrderedDict((path, text) for path, text in file_map.items()
                       if not _is_excluded(path, exclude))
