MAJOR, MINOR, PATCH = 0, 1, 0
STAGE = 'alpha'


def get_version(form='short'):
    '''Package version string.

    :param form: 'short' gives e.g. 0.1.0, 'long' appends the release stage (0.1.0-alpha)
    '''
    numbered = '{0}.{1}.{2}'.format(MAJOR, MINOR, PATCH)
    if form == 'short':
        return numbered
    if form == 'long':
        return numbered if STAGE == 'final' else '{0}-{1}'.format(numbered, STAGE)
    raise ValueError('unrecognised form specifier: {0}'.format(form))


__version__ = get_version()
