"""Error types and process exit codes."""

from enum import IntEnum


class ExitCode(IntEnum):
  """Exit codes of the `diffil` CLI."""

  SUCCESS = 0
  ERROR = 1
  CONFIG = 2
  DATA = 3
  NUMERIC = 4
  INTERRUPTED = 130


class DiffilError(Exception):
  """Base class for errors that map onto a CLI exit code."""

  exit_code: ExitCode = ExitCode.ERROR


class ConfigError(DiffilError):
  """Invalid experiment configuration or incompatible inputs."""

  exit_code = ExitCode.CONFIG


class DataFormatError(DiffilError):
  """A corpus, checkpoint or log on disk is malformed.

  Attributes:
      field: Name of the offending manifest field or payload.
  """

  exit_code = ExitCode.DATA

  def __init__(self, message: str, field: str | None = None) -> None:
    super().__init__(message if field is None else f"{field}: {message}")
    self.field = field


class NumericError(DiffilError):
  """A loss term became NaN or infinite.

  Attributes:
      term: Name of the offending loss term.
  """

  exit_code = ExitCode.NUMERIC

  def __init__(self, term: str, value: float) -> None:
    super().__init__(f"non-finite loss term {term!r} ({value})")
    self.term = term
    self.value = value
