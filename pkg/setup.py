#!/usr/bin/env python
import os
try:
    from setuptools import setup
except ImportError:
    from distutils.core import setup

from revertgraph.version import get_version


def read(fname):
    return open(os.path.join(os.path.dirname(__file__), fname)).read()


def requirements():
    path = os.path.join('revertgraph', 'installation', 'requirements', 'requirements.txt')
    return [line.strip() for line in read(path).splitlines() if line.strip()]


setup(
    name='revertgraph',
    version=get_version(),
    description='Code revert prediction from import graphs and commit history',
    long_description=read('README.rst'),

    packages=['revertgraph',
              'revertgraph.utils',
              'revertgraph.processing',
              'revertgraph.analysis',
              'revertgraph.installation',
              'revertgraph.installation.scripts',
              'revertgraph.installation.settings'],
    scripts=[
        'revertgraph/revertgraph-admin.py',
        ],
    entry_points={'console_scripts': ['revertgraph = revertgraph.cli:main']},

    install_requires=requirements(),
    extras_require={'test': ['pytest', 'pycodestyle']},
    package_data={'revertgraph.installation': [
        'requirements/*.txt',
        'configs/*.json',
        ]},
    python_requires='>=3.7',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Natural Language :: English',
        'Operating System :: POSIX :: Linux',
        'Programming Language :: Python :: 3',
        'Topic :: Software Development :: Quality Assurance',
        ],
    keywords=['revert prediction', 'graph neural networks', 'imbalanced classification'],
    )
