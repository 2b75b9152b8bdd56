"""
Logging configuration for the spherepart pipeline.

Provides console and file logging with configurable levels.
"""

import logging
import os
import sys
from pathlib import Path
from typing import Optional

DEFAULT_LOG_FILE = './runs/logs/spherepart.log'


def setup_logger(
    name: str,
    level: int = logging.INFO,
    log_file: Optional[str] = None
) -> logging.Logger:
    """
    Configure logger with console and optional file handlers.

    Args:
        name: Logger name (typically __name__ from calling module)
        level: Minimum console level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Optional path to log file. If None, uses $SPHEREPART_LOG_FILE
            or './runs/logs/spherepart.log'

    Returns:
        Configured logger instance

    Example:
        >>> logger = setup_logger(__name__)
        >>> logger.info("Solver started")
        >>> logger.warning("Printed constant does not bound the sampled diameter")
    """
    logger = logging.getLogger(name)
    logger.setLevel(logging.DEBUG)

    # Avoid adding duplicate handlers
    if logger.handlers:
        return logger

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(level)
    console_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    console_handler.setFormatter(console_formatter)
    logger.addHandler(console_handler)

    if log_file is None:
        log_file = os.environ.get('SPHEREPART_LOG_FILE', DEFAULT_LOG_FILE)

    log_path = Path(log_file)
    log_path.parent.mkdir(parents=True, exist_ok=True)

    file_handler = logging.FileHandler(log_path, mode='a', encoding='utf-8')
    file_handler.setLevel(logging.DEBUG)  # Always log DEBUG to file
    file_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    file_handler.setFormatter(file_formatter)
    logger.addHandler(file_handler)

    # Records stop here; the root logger stays untouched for library users
    logger.propagate = False

    return logger


def set_console_level(level: int) -> None:
    """
    Change the console level of every spherepart logger created so far.

    Args:
        level: New console level (file handlers keep logging DEBUG)
    """
    for name, candidate in logging.Logger.manager.loggerDict.items():
        if not isinstance(candidate, logging.Logger):
            continue
        if not (name.startswith('spherepart') or name in ('__main__', 'sphere_partition')):
            continue
        for handler in candidate.handlers:
            if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler):
                handler.setLevel(level)


def progress_disabled(logger: logging.Logger) -> bool:
    """Return True when the console would not show INFO messages (tqdm bars off)."""
    for handler in logger.handlers:
        if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler):
            return handler.level > logging.INFO
    return True
