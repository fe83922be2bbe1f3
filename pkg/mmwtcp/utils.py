import logging


NS_PER_S = 1000000000
NS_PER_MS = 1000000
NS_PER_US = 1000


def _get_logger(debug, name='mmwtcp'):
    logger = logging.getLogger(name)
    if (logger.parent is not None) and logger.parent.hasHandlers() and debug:
        logger.warning('"debug=True" is ignored when user specifies '
                       'logging event handlers')
    else:
        if not logger.handlers:
            formatter = logging.Formatter('%(name)s:%(levelname)s:%(message)s')
            sh = logging.StreamHandler()
            sh.setFormatter(formatter)
            logger.addHandler(sh)
        debug_level = logging.INFO if debug else logging.WARNING
        logger.setLevel(debug_level)

    return logger


def seconds(value):
    """
    Convert seconds to integer simulation ticks (nanoseconds)
    """
    return int(round(value * NS_PER_S))


def ms(value):
    return int(round(value * NS_PER_MS))


def us(value):
    return int(round(value * NS_PER_US))


def to_seconds(ticks):
    return ticks / NS_PER_S


def db_to_linear(value_db):
    return 10.0 ** (value_db / 10.0)
