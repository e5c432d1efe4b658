"""Centralized logging configuration for fks3d."""
import logging
import os

# Flag to enable/disable informational logging
# Can be overridden by environment variable FKS_DEBUG
DEBUG_LOGGING = os.environ.get('FKS_DEBUG', 'False').lower() == 'true'

_named_loggers = set()


def _default_level() -> int:
    return logging.INFO if DEBUG_LOGGING else logging.WARNING


def setup_logging():
    """Configure the root logger."""
    logging.basicConfig(
        level=_default_level(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%H:%M:%S'
    )


def set_verbose(verbose: bool = True):
    """Switch every logger handed out by get_logger to INFO (or back to the default)."""
    level = logging.INFO if verbose else _default_level()
    logging.getLogger().setLevel(level)
    for name in _named_loggers:
        logging.getLogger(name).setLevel(level)


def get_logger(name: str):
    """Get a named logger instance."""
    logger = logging.getLogger(name)
    _named_loggers.add(name)
    # Ensure the logger respects the global level if not already set
    if not logger.level:
        logger.setLevel(_default_level())
    return logger


# Initial setup on module import
setup_logging()
