'''Exception hierarchy shared by all revertgraph modules.

Every module raises a subclass of :class:`RevertGraphError` for bad input data,
which lets the command line surface tell data errors apart from usage errors.
'''


class RevertGraphError(Exception):
    '''Base class for all data/processing errors raised by revertgraph'''
    pass


class ConfigError(RevertGraphError):
    '''Raised for invalid settings, experiment configs or unknown names'''
    pass
