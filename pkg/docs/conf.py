# -*- coding: utf-8 -*-
#
# revertgraph documentation build configuration file.
import sys
import os

sys.path.insert(0, os.path.abspath('..'))
from revertgraph.version import get_version

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.doctest',
    'sphinx.ext.coverage',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'revertgraph'
copyright = u'2026, the revertgraph developers'

version = get_version()
release = get_version(form='long')

exclude_patterns = ['_build']
pygments_style = 'sphinx'

html_theme = 'default'
htmlhelp_basename = 'revertgraphdoc'

man_pages = [
    ('index', 'revertgraph', u'revertgraph Documentation',
     [u'the revertgraph developers'], 1)
]
