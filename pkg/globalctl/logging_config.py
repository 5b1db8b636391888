"""
Logging configuration for globalctl.

The CLI calls setup_logging once; library modules log through
``logging.getLogger(__name__)`` and inherit the handler of the
``globalctl`` logger.

Example usage:
    from globalctl.logging_config import setup_logging
    logger = setup_logging(name="globalctl", debug=True)
    logger.info("Starting Monte Carlo run")
"""

import logging
import sys

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

DEFAULT_LOGGER_NAME = "globalctl"

_logger = None


def setup_logging(
    name: str = DEFAULT_LOGGER_NAME,
    debug: bool = False,
    quiet: bool = False,
    log_format: str = LOG_FORMAT,
    date_format: str = DATE_FORMAT,
):
    """
    Sets up and returns a configured logger.

    Args:
        name: Logger name (defaults to "globalctl")
        debug: If True, sets log level to DEBUG (overrides quiet)
        quiet: If True, sets log level to WARNING (suppresses INFO)
        log_format: Custom log format string
        date_format: Custom date format string

    Returns:
        Configured logger instance

    Logging Level Behavior:
        | debug | quiet | Level   |
        |-------|-------|---------|
        | False | False | INFO    |
        | False | True  | WARNING |
        | True  | any   | DEBUG   |
    """
    logger = logging.getLogger(name)

    # Clear existing handlers to prevent duplicates
    logger.handlers.clear()

    if debug:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    else:
        level = logging.INFO
    logger.setLevel(level)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(level)
    console_handler.setFormatter(logging.Formatter(log_format, datefmt=date_format))
    logger.addHandler(console_handler)

    return logger


def get_logger(name: str = None):
    """
    Gets or creates a logger with the given name.

    With no name, returns the package logger, configuring it with defaults on
    first use. With a name, returns that logger (module loggers under
    ``globalctl.`` propagate to the package logger).

    Args:
        name: Optional logger name

    Returns:
        Logger instance
    """
    global _logger

    if name is None:
        if _logger is None:
            _logger = setup_logging()
        return _logger

    return logging.getLogger(name)
