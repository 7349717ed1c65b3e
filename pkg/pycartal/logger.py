import logging

logger = logging.getLogger(__package__)


def configure_logging(level: str = 'INFO') -> None:
    """
    Attach a stderr handler to the root logger (only ever called by the command line entry point)
    :param level: Name of the log level, e.g. "DEBUG"
    :return: None
    """
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s'
    )
