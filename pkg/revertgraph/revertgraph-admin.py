#!/usr/bin/env python
import sys

try:
    from revertgraph.cli import dispatch
except ImportError:
    print('Problem importing revertgraph.cli')
    raise


if __name__ == '__main__':
    sys.exit(dispatch())
