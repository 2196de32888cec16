import logging
import os
from logging.handlers import RotatingFileHandler
from typing import Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def setup_logger(name: str, log_file: Optional[str] = None, level: Optional[str] = None) -> logging.Logger:
    """
    Set up a logger with the specified name and configuration.

    Calling it again for the same name replaces the handlers instead of
    stacking new ones.

    Args:
        name: Name of the logger ("app" configures every library module)
        log_file: Path to a rotating log file. If None, uses LOG_FILE from .env;
            an empty value logs to the console only
        level: Logging level. If None, uses LOG_LEVEL from .env

    Returns:
        Configured logger instance
    """
    log_file = log_file if log_file is not None else os.getenv("LOG_FILE", "")
    log_level = (level or os.getenv("LOG_LEVEL", "INFO")).upper()
    if not isinstance(getattr(logging, log_level, None), int):
        raise ValueError(f"Unknown log level: {log_level}")

    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, log_level))
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    # Console handler writes to stderr
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    logger.addHandler(console_handler)

    if log_file:
        directory = os.path.dirname(os.path.abspath(log_file))
        os.makedirs(directory, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_file, maxBytes=10 * 1024 * 1024, backupCount=5  # 10MB
        )
        file_handler.setFormatter(
            logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        )
        logger.addHandler(file_handler)

    return logger
