import os
import logging

from revertgraph.load_settings import settings


def get_logger(name):
    '''Gets a logger specified by name. Sets up root logger ('rg') if nec.'''
    # Get root revertgraph logger and check if it's already been setup.
    root_logger = logging.getLogger('rg')

    if getattr(root_logger, 'is_setup', False):
        # Stops log being setup for a 2nd time during a module reload.
        root_logger.debug('Root logger already setup')
    else:
        console_level = getattr(settings, 'CONSOLE_LOG_LEVEL', 'INFO').upper()
        file_level = getattr(settings, 'FILE_LOG_LEVEL', 'DEBUG').upper()
        logging_dir = getattr(settings, 'LOGGING_DIR', None)

        formatter = logging.Formatter('%(asctime)s:%(name)-12s:%(levelname)-8s: %(message)s')

        stream_handler = logging.StreamHandler()
        stream_handler.setFormatter(formatter)
        stream_handler.setLevel(console_level)
        root_logger.addHandler(stream_handler)
        levels = [logging.getLevelName(console_level)]

        # Log file only when LOGGING_DIR is set.
        if logging_dir:
            if not os.path.exists(logging_dir):
                os.makedirs(logging_dir)
            logging_filename = os.path.join(logging_dir, 'revertgraph.log')
            file_handler = logging.FileHandler(logging_filename, mode='a')
            file_handler.setFormatter(formatter)
            file_handler.setLevel(file_level)
            root_logger.addHandler(file_handler)
            levels.append(logging.getLevelName(file_level))
            root_logger.debug('Created root logger: {0}'.format(logging_filename))

        root_logger.setLevel(min(levels))
        root_logger.is_setup = True

    if name == 'rg':
        return root_logger
    else:
        logger = logging.getLogger(name)
        return logger


def set_console_level(level):
    '''Changes the level of the console handler (e.g. from the CLI's verbosity flag)'''
    root_logger = get_logger('rg')
    for handler in root_logger.handlers:
        if not isinstance(handler, logging.FileHandler):
            handler.setLevel(level.upper())
    if logging.getLevelName(level.upper()) < root_logger.level:
        root_logger.setLevel(level.upper())
