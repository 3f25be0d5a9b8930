"""
diffil - cross-domain imitation from pixels

Generate corpora, train, and analyse DIFF-IL runs.

Examples:
  diffil generate-data --profile toy --seed 0
  diffil train --profile toy --seed 0
  diffil map-features ~/.diffil/runs/toy-s0
  diffil export-curves runs/toy-s0 runs/toy-s1 runs/toy-s2 --plot curve.png
"""

import shutil
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import torch
import typer
from rich.panel import Panel
from rich.table import Table

from diffil import __version__
from diffil.analysis import (
  domain_probe,
  encode_frames,
  export_curves,
  export_features,
  learner_policy,
  map_features,
  probe_frames,
  reward_traces,
)
from diffil.config import ExperimentConfig, Profile, load_config, save_config
from diffil.console import console, err_console
from diffil.data.dataset import TrajectoryDataset
from diffil.data.types import DomainTag, ProvenanceTag
from diffil.envs import (
  ENVIRONMENTS,
  Corpora,
  expert_policy,
  generate_corpora,
  load_corpora,
  make_env,
  rollout,
  save_corpora,
)
from diffil.errors import ConfigError, DataFormatError, DiffilError, ExitCode
from diffil.logging import configure_logging, get_logger
from diffil.settings import settings
from diffil.training import (
  CONFIG_NAME,
  RUN_STATE_NAME,
  Trainer,
  evaluate_policy,
  load_learner_buffer,
  load_trained_model,
)

logger = get_logger("cli")

app = typer.Typer(
  name="diffil",
  help="Cross-domain imitation from pixels with DIFF-IL.",
  no_args_is_help=True,
  pretty_exceptions_enable=True,
  pretty_exceptions_show_locals=False,
  pretty_exceptions_short=True,
  rich_markup_mode="rich",
)

CORPORA_DIR = "corpora"


class CorpusName(str, Enum):
  """Frame stores a command can read."""

  source_expert = "source_expert"
  source_random = "source_random"
  target_random = "target_random"
  learner = "learner"


# -- shared options ----------------------------------------------------------

CONFIG_OPTION = typer.Option(
  None, "--config", "-c", help="TOML config file (defaults: the profile's)"
)
PROFILE_OPTION = typer.Option(None, "--profile", "-p", help="Profile defaults")
SEED_OPTION = typer.Option(None, "--seed", "-s", help="Override the config seed")
DATA_OPTION = typer.Option(
  None, "--data", "-d", help="Corpora directory (default: from the config)"
)


@contextmanager
def _errors() -> Iterator[None]:
  """Turn DIFF-IL errors into a one-line message and the matching exit code."""
  try:
    yield
  except DiffilError as e:
    err_console.print(f"[red]error:[/red] {e}")
    raise typer.Exit(e.exit_code) from None


def _config(
  config: Path | None, profile: Profile | None, seed: int | None
) -> ExperimentConfig:
  overrides: dict[str, Any] = {"profile": profile, "seed": seed}
  return load_config(config, overrides)


def default_data_dir(config: ExperimentConfig) -> Path:
  """<DIFFIL_RUN_DIR>/corpora/<profile>-s<seed>."""
  return settings.run_dir / CORPORA_DIR / f"{config.profile}-s{config.seed}"


def _prepare_output(path: Path, force: bool) -> None:
  if path.exists() and any(path.iterdir()):
    if not force:
      msg = f"{path} is not empty; pass --force to overwrite it"
      raise ConfigError(msg)
    shutil.rmtree(path)
  path.mkdir(parents=True, exist_ok=True)


def _run_corpora(config: ExperimentConfig, data: Path | None) -> Corpora:
  return load_corpora(data or default_data_dir(config), config)


def _frames_and_positions(
  name: CorpusName, corpora: Corpora, run_dir: Path, env_name: str
) -> tuple[np.ndarray, np.ndarray | None]:
  """Frames of one store and their task coordinates (when states exist)."""
  env_cls = ENVIRONMENTS[env_name]
  if name is CorpusName.learner:
    buffer = load_learner_buffer(run_dir)
    if len(buffer) == 0:
      raise DataFormatError("the learner buffer is empty", field=RUN_STATE_NAME)
    batch = buffer.batch(np.arange(len(buffer), dtype=np.int64))
    positions = np.array([env_cls.state_position(s) for s in batch.next_states])
    return batch.obs_seq[:, -1], positions
  ds: TrajectoryDataset = corpora.items()[ProvenanceTag(name.value)]
  states = ds.all_states()
  positions = (
    None if states is None else np.array([env_cls.state_position(s) for s in states])
  )
  return ds.all_frames(), positions


# -- commands ----------------------------------------------------------------


@app.command("generate-data")
def generate_data(
  config: Path | None = CONFIG_OPTION,
  profile: Profile | None = PROFILE_OPTION,
  seed: int | None = SEED_OPTION,
  out: Path | None = typer.Option(None, "--out", "-o", help="Output directory"),
  force: bool = typer.Option(False, "--force", help="Overwrite a non-empty --out"),
) -> None:
  """Generate the source-expert, source-random and target-random corpora."""
  with _errors():
    cfg = _config(config, profile, seed)
    out = out or default_data_dir(cfg)
    _prepare_output(out, force)
    corpora = generate_corpora(cfg)
    save_corpora(corpora, out)
    save_config(cfg, out / CONFIG_NAME)

    table = Table(title=f"Corpora in {out}")
    table.add_column("Corpus", style="cyan")
    table.add_column("Episodes", justify="right")
    table.add_column("Frames", justify="right")
    for provenance, ds in corpora.items().items():
      table.add_row(provenance.value, str(len(ds.episodes)), str(ds.num_frames))
    console.print(table)


@app.command("train")
def train(
  config: Path | None = CONFIG_OPTION,
  profile: Profile | None = PROFILE_OPTION,
  seed: int | None = SEED_OPTION,
  data: Path | None = DATA_OPTION,
  out: Path | None = typer.Option(None, "--out", "-o", help="Run directory"),
  force: bool = typer.Option(
    False, "--force", help="Start over instead of resuming an existing run"
  ),
) -> None:
  """Train on the corpora, resuming the run directory's checkpoint if present."""
  with _errors():
    cfg = _config(config, profile, seed)
    run_dir = out or cfg.run_dir(settings.run_dir)
    corpora = _run_corpora(cfg, data)
    if (run_dir / RUN_STATE_NAME).is_file() and not force:
      saved = load_config(run_dir / CONFIG_NAME)
      if saved != cfg:
        msg = f"{run_dir} holds a run with a different config; pass --force"
        raise ConfigError(msg)
      trainer = Trainer.resume(cfg, corpora, run_dir)
    else:
      _prepare_output(run_dir, force)
      save_config(cfg, run_dir / CONFIG_NAME)
      trainer = Trainer(cfg, corpora, run_dir=run_dir)

    rows = trainer.train()
    if rows:
      last = rows[-1]
      summary = (
        f"iterations: {last.iteration}\n"
        f"env steps: {last.env_steps}\n"
        f"eval return: {last.eval_return_mean:.3f} +- {last.eval_return_std:.3f}"
      )
    else:
      summary = f"nothing to do: run is at iteration {trainer.iteration}"
    console.print(Panel(summary, title=str(run_dir), border_style="green"))


@app.command("evaluate")
def evaluate(
  run_dir: Path = typer.Argument(..., help="Run directory"),
  episodes: int = typer.Option(10, "--episodes", "-n", min=1),
  seed: int | None = SEED_OPTION,
) -> None:
  """Ground-truth return of the deterministic learner in the target domain."""
  with _errors():
    cfg, model = load_trained_model(run_dir)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    env = make_env(
      cfg.env.name, DomainTag.TARGET, cfg.env.episode_len, cfg.network.image_size
    )
    returns = evaluate_policy(env, model.agent.policy, episodes, rng)
    oracle = np.array(
      [rollout(env, expert_policy, rng).eval_return for _ in range(episodes)]
    )
    ratio = float(returns.mean() / oracle.mean()) if oracle.mean() else float("nan")

    table = Table(title=f"Evaluation over {episodes} episodes")
    table.add_column("Policy", style="cyan")
    table.add_column("Mean", justify="right")
    table.add_column("Std", justify="right")
    table.add_row("learner", f"{returns.mean():.4f}", f"{returns.std():.4f}")
    table.add_row("oracle expert", f"{oracle.mean():.4f}", f"{oracle.std():.4f}")
    console.print(table)
    console.print(f"learner / oracle: [bold]{ratio:.3f}[/bold]")


@app.command("map-features")
def map_features_command(
  run_dir: Path = typer.Argument(..., help="Run directory"),
  corpus: CorpusName = typer.Option(
    CorpusName.learner, "--corpus", help="Frames to map"
  ),
  data: Path | None = DATA_OPTION,
  threshold: float = typer.Option(0.1, "--threshold", help="Position tolerance"),
  out: Path | None = typer.Option(None, "--out", "-o", help="Per-frame CSV"),
) -> None:
  """Match frames to their nearest source-expert frame in feature space."""
  with _errors():
    cfg, model = load_trained_model(run_dir)
    corpora = _run_corpora(cfg, data)
    query, query_pos = _frames_and_positions(corpus, corpora, run_dir, cfg.env.name)
    reference, ref_pos = _frames_and_positions(
      CorpusName.source_expert, corpora, run_dir, cfg.env.name
    )
    report = map_features(
      model.perception.encoder,
      query,
      reference,
      query_positions=query_pos,
      reference_positions=ref_pos,
      position_error=ENVIRONMENTS[cfg.env.name].position_error,
      self_match=corpus is CorpusName.source_expert,
    )
    if out is not None:
      out.parent.mkdir(parents=True, exist_ok=True)
      report.to_frame().to_csv(out, index=False)

    table = Table(title=f"{corpus.value} -> source_expert")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right")
    table.add_row("frames", str(len(report)))
    table.add_row("median feature distance", f"{np.median(report.distances):.4f}")
    if report.position_errors is not None:
      table.add_row("median position error", f"{report.median_error:.4f}")
      table.add_row(
        f"within {threshold:g}", f"{report.fraction_within(threshold):.1%}"
      )
    console.print(table)


@app.command("probe-domain")
def probe_domain(
  run_dir: Path = typer.Argument(..., help="Run directory"),
  data: Path | None = DATA_OPTION,
  per_domain: int = typer.Option(1000, "--per-domain", min=1),
  seed: int | None = SEED_OPTION,
) -> None:
  """Held-out domain classification accuracy on features and raw pixels."""
  with _errors():
    cfg, model = load_trained_model(run_dir)
    corpora = _run_corpora(cfg, data)
    probe_seed = cfg.seed if seed is None else seed
    frames, labels = probe_frames(
      corpora, per_domain, np.random.default_rng(probe_seed)
    )
    features = encode_frames(model.perception.encoder, frames)
    pixels = frames.reshape(len(frames), -1) / 255.0
    results = {
      "encoder features": domain_probe(features, labels, seed=probe_seed),
      "raw pixels": domain_probe(pixels, labels, seed=probe_seed),
      "shuffled labels": domain_probe(
        features, labels, seed=probe_seed, shuffle_labels=True
      ),
    }

    table = Table(title="Domain probe (held-out accuracy)")
    table.add_column("Input", style="cyan")
    table.add_column("Accuracy", justify="right")
    table.add_column("Train / test", justify="right", style="dim")
    for name, result in results.items():
      table.add_row(
        name, f"{result.accuracy:.3f}", f"{result.n_train} / {result.n_test}"
      )
    console.print(table)


@app.command("export-curves")
def export_curves_command(
  run_dirs: list[Path] = typer.Argument(..., help="One run, or seeds of one run"),
  out: Path = typer.Option(Path("curve.csv"), "--out", "-o", help="CSV path"),
  plot: Path | None = typer.Option(None, "--plot", help="Also render a PNG"),
) -> None:
  """Learning-curve CSV (and plot), aggregated over seeds when several runs."""
  with _errors():
    curve = export_curves(run_dirs, out, plot)
    console.print(f"[green]![/green] {len(curve)} rows -> {out}")


@app.command("export-features")
def export_features_command(
  run_dir: Path = typer.Argument(..., help="Run directory"),
  data: Path | None = DATA_OPTION,
  out: Path = typer.Option(Path("features.npz"), "--out", "-o"),
) -> None:
  """Frozen encoder features of every corpus frame as .npz."""
  with _errors():
    cfg, model = load_trained_model(run_dir)
    count = export_features(model.perception.encoder, _run_corpora(cfg, data), out)
    console.print(f"[green]![/green] {count} feature vectors -> {out}")


@app.command("trace-rewards")
def trace_rewards(
  run_dir: Path = typer.Argument(..., help="Run directory"),
  corpus: CorpusName = typer.Option(
    CorpusName.source_expert,
    "--corpus",
    help="Episodes to trace; `learner` rolls out the learner in the target domain",
  ),
  data: Path | None = DATA_OPTION,
  episodes: int = typer.Option(5, "--episodes", "-n", min=1),
  out: Path = typer.Option(Path("rewards.csv"), "--out", "-o"),
) -> None:
  """Per-timestep F_f, F_s and reward along whole episodes, as CSV."""
  with _errors():
    cfg, model = load_trained_model(run_dir)
    if corpus is CorpusName.learner:
      env = make_env(
        cfg.env.name, DomainTag.TARGET, cfg.env.episode_len, cfg.network.image_size
      )
      rng = np.random.default_rng(cfg.seed)
      policy = learner_policy(model.agent.policy)
      chosen = [rollout(env, policy, rng).episode for _ in range(episodes)]
    else:
      ds = _run_corpora(cfg, data).items()[ProvenanceTag(corpus.value)]
      chosen = [e for e in ds.episodes[:episodes] if len(e) > 1]
    if not chosen:
      raise DataFormatError("no episode with at least two frames", field="episodes")
    traces = reward_traces(
      model,
      chosen,
      frame_labels=cfg.frame_labels_enabled,
      eps=cfg.losses.reward_eps,
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    traces.to_csv(out, index=False)
    console.print(
      f"[green]![/green] {len(chosen)} episodes, {len(traces)} rows -> {out}"
    )


@app.callback(invoke_without_command=True)
def main(
  ctx: typer.Context,
  version: bool = typer.Option(False, "--version", help="Show version and exit"),
  log_level: str | None = typer.Option(
    None, "--log-level", help="Console log level (default: DIFFIL_LOG_LEVEL)"
  ),
) -> None:
  """
  Cross-domain imitation from pixels with DIFF-IL.

  Common workflows:
    diffil generate-data       Write the three offline corpora
    diffil train               Train (or resume) a run
    diffil evaluate RUN        Ground-truth return of the learner
    diffil export-curves RUN   Learning curve as CSV
  """
  if version:
    console.print(f"diffil version {__version__}")
    raise typer.Exit()

  configure_logging(log_level)
  torch.set_num_threads(settings.num_threads)

  if ctx.invoked_subcommand is None:
    console.print(ctx.get_help())


def main_with_interrupt_handler() -> None:
  """Entry point that handles keyboard interrupts gracefully."""
  try:
    app()
  except KeyboardInterrupt:
    console.print("\n[dim]Interrupted[/dim]")
    sys.exit(ExitCode.INTERRUPTED)


if __name__ == "__main__":
  main_with_interrupt_handler()
