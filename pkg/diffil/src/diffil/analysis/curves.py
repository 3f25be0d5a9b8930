"""Learning curves from run metrics logs."""

from collections.abc import Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from diffil.errors import DataFormatError  # noqa: E402
from diffil.logging import get_logger  # noqa: E402
from diffil.training.metrics import METRICS_NAME, MetricsLog  # noqa: E402

logger = get_logger("analysis.curves")

CURVE_COLUMNS = ["iteration", "env_steps", "eval_return_mean", "eval_return_std"]
AGGREGATE_COLUMNS = [*CURVE_COLUMNS, "num_seeds"]


def load_curve(run_dir: Path) -> pd.DataFrame:
  """The learning curve of one run.

  Raises:
      DataFormatError: If the run has no metrics rows.
  """
  frame = MetricsLog(run_dir / METRICS_NAME).to_frame()
  if frame.empty:
    raise DataFormatError(f"no metrics rows in {run_dir}", field=METRICS_NAME)
  return frame[CURVE_COLUMNS].reset_index(drop=True)


def aggregate_curves(curves: Sequence[pd.DataFrame]) -> pd.DataFrame:
  """Combine per-seed curves by iteration.

  `eval_return_mean` is the mean over seeds of each seed's mean return and
  `eval_return_std` the population standard deviation of those means.
  Iterations missing from some seeds average over the seeds that have them.
  """
  if not curves:
    raise ValueError("no curves to aggregate")
  stacked = pd.concat(
    [curve.assign(seed=i) for i, curve in enumerate(curves)], ignore_index=True
  )
  grouped = stacked.groupby("iteration", sort=True)
  result = pd.DataFrame(
    {
      "env_steps": grouped["env_steps"].mean(),
      "eval_return_mean": grouped["eval_return_mean"].mean(),
      "eval_return_std": grouped["eval_return_mean"].std(ddof=0),
      "num_seeds": grouped["seed"].nunique(),
    }
  ).reset_index()
  return result[AGGREGATE_COLUMNS]


def plot_curve(curve: pd.DataFrame, path: Path, title: str = "") -> None:
  """Mean return against environment steps with a +-1 std band."""
  fig, ax = plt.subplots(figsize=(6, 4))
  try:
    steps = curve["env_steps"]
    mean = curve["eval_return_mean"]
    std = curve["eval_return_std"]
    ax.plot(steps, mean, lw=1.5)
    ax.fill_between(steps, mean - std, mean + std, alpha=0.25, lw=0)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("evaluation return")
    if title:
      ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
  finally:
    plt.close(fig)


def export_curves(
  run_dirs: Sequence[Path], out_csv: Path, plot_path: Path | None = None
) -> pd.DataFrame:
  """Write the (aggregated) learning curve of one or more runs as CSV.

  A single run is written with CURVE_COLUMNS; several runs are treated as
  seeds of one experiment and written with AGGREGATE_COLUMNS.
  """
  curves = [load_curve(run_dir) for run_dir in run_dirs]
  curve = curves[0] if len(curves) == 1 else aggregate_curves(curves)
  out_csv.parent.mkdir(parents=True, exist_ok=True)
  curve.to_csv(out_csv, index=False)
  logger.info("Wrote %d curve rows to %s", len(curve), out_csv)
  if plot_path is not None:
    plot_curve(curve, plot_path, title=out_csv.stem)
    logger.info("Wrote learning-curve plot to %s", plot_path)
  return curve
