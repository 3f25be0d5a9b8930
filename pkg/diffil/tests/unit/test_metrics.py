"""Tests for the metrics log."""

from pathlib import Path

import pytest
from diffil.errors import DataFormatError
from diffil.training import METRICS_NAME, MetricsLog, MetricsRow
from hamcrest import assert_that, equal_to, has_length


def _row(iteration: int, **values: float) -> MetricsRow:
  return MetricsRow(
    iteration=iteration,
    env_steps=100 * iteration,
    wall_clock=0.5 * iteration,
    eval_return_mean=float(iteration),
    eval_return_std=0.0,
    **values,
  )


@pytest.fixture
def log(tmp_path: Path) -> MetricsLog:
  return MetricsLog(tmp_path / "run" / METRICS_NAME)


class TestMetricsLog:
  """Append, read back and truncate."""

  def test_missing_file_is_empty(self, log: MetricsLog) -> None:
    """Test a run without a log has no rows."""
    assert log.rows() == []

  def test_append_and_read(self, log: MetricsLog) -> None:
    """Test rows come back in order with their values."""
    log.append(_row(1, recon=0.25))
    log.append(_row(2))

    rows = log.rows()

    assert_that(rows, has_length(2))
    assert rows[0].recon == 0.25
    assert rows[1].recon is None
    assert_that(len(log.path.read_text().splitlines()), equal_to(2))

  def test_truncate(self, log: MetricsLog) -> None:
    """Test rows after the resumed iteration are dropped."""
    for i in range(1, 5):
      log.append(_row(i))

    log.truncate(2)

    assert [row.iteration for row in log.rows()] == [1, 2]

  def test_invalid_line_named(self, log: MetricsLog) -> None:
    """Test a corrupt row is reported with its line number."""
    log.append(_row(1))
    with log.path.open("a") as f:
      f.write('{"iteration": "x"}\n')

    with pytest.raises(DataFormatError) as exc_info:
      log.rows()

    assert exc_info.value.field == "line 2"

  def test_unknown_column_rejected(self) -> None:
    """Test rows refuse columns they do not define."""
    with pytest.raises(ValueError):
      _row(1, mystery=1.0)

  def test_to_frame(self, log: MetricsLog) -> None:
    """Test the log loads as one DataFrame row per iteration."""
    log.append(_row(1, gp=0.1))
    log.append(_row(2, gp=0.2))

    frame = log.to_frame()

    assert frame["iteration"].tolist() == [1, 2]
    assert frame["gp"].tolist() == [0.1, 0.2]
    assert "eval_return_std" in frame.columns
