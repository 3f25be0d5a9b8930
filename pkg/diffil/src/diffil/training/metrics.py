"""Append-only metrics log of a training run (one JSON object per line)."""

from pathlib import Path

import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError

from diffil.errors import DataFormatError

METRICS_NAME = "metrics.jsonl"

# Columns that legitimately differ between two runs with the same seed
NONDETERMINISTIC_COLUMNS = ("wall_clock",)


class MetricsRow(BaseModel):
  """Per-iteration summary.

  Loss columns are means over the iteration's updates; a loss that was not
  computed (e.g. frame labels under an ablation) is None.
  """

  model_config = ConfigDict(extra="forbid")

  iteration: int
  env_steps: int
  wall_clock: float
  recon: float | None = None
  fcon: float | None = None
  disc_f: float | None = None
  disc_s: float | None = None
  gp: float | None = None
  unified_disc: float | None = None
  gen_f: float | None = None
  gen_s: float | None = None
  unified_gen: float | None = None
  seq_label_source: float | None = None
  seq_label_target: float | None = None
  frame_label: float | None = None
  sac_critic: float | None = None
  sac_actor: float | None = None
  sac_entropy: float | None = None
  entropy_coef: float | None = None
  reward_mean: float | None = None
  eval_return_mean: float
  eval_return_std: float
  critic_updates: int = 0
  generator_updates: int = 0
  clamped_actions: int = 0


class MetricsLog:
  """The run's `metrics.jsonl`.

  Example:
      log = MetricsLog(run_dir / METRICS_NAME)
      log.append(row)
      frame = log.to_frame()
  """

  def __init__(self, path: Path) -> None:
    self.path = path

  def append(self, row: MetricsRow) -> None:
    self.path.parent.mkdir(parents=True, exist_ok=True)
    with self.path.open("a") as f:
      f.write(row.model_dump_json() + "\n")

  def rows(self) -> list[MetricsRow]:
    """Every row in file order.

    Raises:
        DataFormatError: If a line is not a valid row.
    """
    if not self.path.is_file():
      return []
    rows: list[MetricsRow] = []
    for number, line in enumerate(self.path.read_text().splitlines(), start=1):
      if not line.strip():
        continue
      try:
        rows.append(MetricsRow.model_validate_json(line))
      except ValidationError as e:
        msg = f"invalid metrics row: {e.error_count()} errors"
        raise DataFormatError(msg, field=f"line {number}") from None
    return rows

  def truncate(self, iteration: int) -> None:
    """Drop rows after `iteration`, so a resumed run appends cleanly."""
    kept = [row for row in self.rows() if row.iteration <= iteration]
    self.path.write_text("".join(row.model_dump_json() + "\n" for row in kept))

  def to_frame(self) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in self.rows()])
