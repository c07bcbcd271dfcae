'''Looks for a python file `revertgraph_settings.py` in the current dir'''
import os
import sys

# appends user's current dir to the path.
sys.path.append('.')

# Looks for a modified or a default settings file in '.'.
try:
    import revertgraph_settings as settings
except ImportError:
    sys.path.append(os.path.join(os.path.dirname(__file__), 'installation', 'settings'))
    try:
        import default_revertgraph_settings as settings
    except ImportError:
        print('Could not find default settings file')
        raise


def get_setting(name, overrides=None):
    '''Returns a copy of a dict setting, updated key by key with ``overrides``

    :param name: name of the setting, e.g. 'GCN'
    :param overrides: optional dict whose keys replace those of the setting
    '''
    value = dict(getattr(settings, name))
    if overrides:
        value.update(overrides)
    return value
