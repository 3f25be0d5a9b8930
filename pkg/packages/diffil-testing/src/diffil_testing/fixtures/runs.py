"""Full toy-profile training runs for acceptance tests."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt

from diffil.config import ExperimentConfig, build_config
from diffil.data.types import DomainTag
from diffil.envs import Corpora, generate_corpora, make_env
from diffil.logging import get_logger
from diffil.training import DiffilModel, Trainer, evaluate_policy

logger = get_logger("testing.runs")

FINAL_EPISODES = 10


@dataclass
class ToyRun:
  """A trained run with its corpora and final target-domain returns."""

  config: ExperimentConfig
  corpora: Corpora
  trainer: Trainer
  final_returns: npt.NDArray[np.float64]

  @property
  def model(self) -> DiffilModel:
    return self.trainer.model


def train_toy_run(root: Path, seed: int, ablation: str | None = None) -> ToyRun:
  """Generate corpora and train the toy profile to completion under `root`."""
  overrides: dict[str, object] = {"seed": seed}
  if ablation is not None:
    overrides["ablation"] = ablation
  config = build_config({}, overrides)
  corpora = generate_corpora(config)
  name = f"{ablation or 'full'}-s{seed}"
  trainer = Trainer(config, corpora, run_dir=root / name)
  trainer.train()

  env = make_env(
    config.env.name,
    DomainTag.TARGET,
    config.env.episode_len,
    config.network.image_size,
  )
  rng = np.random.default_rng(10_000 + seed)
  returns = evaluate_policy(env, trainer.model.agent.policy, FINAL_EPISODES, rng)
  logger.info("%s: final return %.3f", name, returns.mean())
  return ToyRun(config, corpora, trainer, returns)
