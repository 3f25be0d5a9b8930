"""Logging configuration for DIFF-IL.

Implements dual logging:
- INFO level to stdout for run progress
- DEBUG level to file (Settings.log_file) for per-step detail
"""

import logging
import sys

from diffil.settings import settings


def configure_logging(level: str | None = None) -> logging.Logger:
  """Configure the `diffil` logger tree.

  Sets up dual logging:
  - `level` (default: Settings.log_level) and above to stdout
  - DEBUG and above to Settings.log_file, if set

  Args:
      level: Console level override, e.g. "DEBUG".

  Returns:
      The configured root logger for the package.
  """
  logger = logging.getLogger("diffil")
  logger.setLevel(logging.DEBUG)

  # Prevent duplicate handlers if called multiple times
  if logger.handlers:
    return logger

  console_formatter = logging.Formatter(
    fmt="%(asctime)s | %(levelname)-8s | %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
  )
  file_formatter = logging.Formatter(
    fmt="%(asctime)s | %(levelname)-8s | %(name)s "
    "| %(funcName)s:%(lineno)d | %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
  )

  console_handler = logging.StreamHandler(sys.stdout)
  console_handler.setLevel(level or settings.log_level)
  console_handler.setFormatter(console_formatter)
  logger.addHandler(console_handler)

  if settings.log_file is not None:
    settings.log_file.parent.mkdir(parents=True, exist_ok=True)
    file_handler = logging.FileHandler(settings.log_file)
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(file_formatter)
    logger.addHandler(file_handler)

  return logger


def get_logger(name: str) -> logging.Logger:
  """Get a logger with the given name under the package namespace.

  Args:
      name: The name for the logger (will be prefixed with `diffil.`).

  Returns:
      A logger instance.
  """
  return logging.getLogger(f"diffil.{name}")
