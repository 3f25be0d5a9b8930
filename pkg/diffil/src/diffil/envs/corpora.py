"""Source-expert, source-random and target-random corpora from scripted policies."""

from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt

from diffil.config import ExperimentConfig
from diffil.data.dataset import Episode, TrajectoryDataset, load_dataset, save_dataset
from diffil.data.types import DomainTag, ProvenanceTag
from diffil.envs.base import Action, PixelEnv
from diffil.envs.registry import make_env
from diffil.errors import ConfigError
from diffil.logging import get_logger

logger = get_logger("envs.corpora")

Policy = Callable[[PixelEnv, np.random.Generator], Action]


def expert_policy(env: PixelEnv, rng: np.random.Generator) -> Action:
  return env.expert_action()


def uniform_policy(env: PixelEnv, rng: np.random.Generator) -> Action:
  return rng.uniform(-1.0, 1.0, size=env.action_dim).astype(np.float32)


@dataclass(frozen=True)
class EpisodeRecord:
  """An episode plus its per-step evaluation rewards and task coordinates."""

  episode: Episode
  eval_rewards: npt.NDArray[np.float64]
  positions: npt.NDArray[np.float64]

  @property
  def eval_return(self) -> float:
    return float(self.eval_rewards.sum())


def rollout(env: PixelEnv, policy: Policy, rng: np.random.Generator) -> EpisodeRecord:
  """Run one full episode, recording frames t = 0..H, states and actions."""
  state, _ = env.reset(seed=int(rng.integers(2**31)))
  frames = [env.render()]
  states = [state]
  actions: list[Action] = []
  rewards: list[float] = []
  positions = [env.position()]
  truncated = False
  while not truncated:
    action = np.clip(policy(env, rng), -1.0, 1.0).astype(np.float32)
    state, reward, _, truncated, _ = env.step(action)
    frames.append(env.render())
    states.append(state)
    actions.append(action)
    rewards.append(reward)
    positions.append(env.position())
  episode = Episode(
    frames=np.stack(frames),
    episode_len=env.episode_len,
    states=np.stack(states).astype(np.float32),
    actions=np.stack(actions).astype(np.float32),
  )
  return EpisodeRecord(episode, np.asarray(rewards), np.asarray(positions))


_PLANS: dict[ProvenanceTag, tuple[Policy, str]] = {
  ProvenanceTag.SOURCE_EXPERT: (expert_policy, "source_expert"),
  ProvenanceTag.SOURCE_RANDOM: (uniform_policy, "source_random"),
  ProvenanceTag.TARGET_RANDOM: (uniform_policy, "target_random"),
}


def generate_corpus(
  config: ExperimentConfig, provenance: ProvenanceTag, rng: np.random.Generator
) -> TrajectoryDataset:
  """Fill one corpus to exactly its configured capacity.

  The last episode is cut short so the frame count equals the capacity.
  """
  policy, capacity_field = _PLANS[provenance]
  capacity: int = getattr(config.buffers, capacity_field)
  episode_len = (
    config.env.episode_len
    if provenance.is_expert
    else config.env.random_episode_len
  )
  env = make_env(
    config.env.name, provenance.domain, episode_len, config.network.image_size
  )
  ds = TrajectoryDataset(provenance, capacity=capacity, seq_len=config.network.seq_len)
  while ds.remaining > 0:
    record = rollout(env, policy, rng)
    ds.add_episode(record.episode.truncated(min(len(record.episode), ds.remaining)))
  logger.info(
    "Generated %s corpus: %d episodes, %d frames",
    provenance,
    len(ds.episodes),
    ds.num_frames,
  )
  return ds


@dataclass
class Corpora:
  source_expert: TrajectoryDataset
  source_random: TrajectoryDataset
  target_random: TrajectoryDataset

  def items(self) -> dict[ProvenanceTag, TrajectoryDataset]:
    return {
      ProvenanceTag.SOURCE_EXPERT: self.source_expert,
      ProvenanceTag.SOURCE_RANDOM: self.source_random,
      ProvenanceTag.TARGET_RANDOM: self.target_random,
    }

  def domain(self, domain: DomainTag) -> list[TrajectoryDataset]:
    return [ds for tag, ds in self.items().items() if tag.domain is domain]


def generate_corpora(config: ExperimentConfig, seed: int | None = None) -> Corpora:
  """Generate the three offline corpora; equal seeds give identical corpora."""
  streams = np.random.SeedSequence(config.seed if seed is None else seed).spawn(3)
  datasets = {
    provenance: generate_corpus(config, provenance, np.random.default_rng(stream))
    for provenance, stream in zip(_PLANS, streams, strict=True)
  }
  return Corpora(
    source_expert=datasets[ProvenanceTag.SOURCE_EXPERT],
    source_random=datasets[ProvenanceTag.SOURCE_RANDOM],
    target_random=datasets[ProvenanceTag.TARGET_RANDOM],
  )


def save_corpora(corpora: Corpora, directory: Path) -> None:
  """Write each corpus to `directory/<provenance>`."""
  for provenance, ds in corpora.items().items():
    save_dataset(ds, directory / provenance.value)


def load_corpora(directory: Path, config: ExperimentConfig | None = None) -> Corpora:
  """Load the three corpora, checking them against `config` when given.

  Raises:
      DataFormatError: If a corpus is missing or malformed.
      ConfigError: If a corpus does not match the configured image size,
          sequence length or provenance.
  """
  loaded: dict[ProvenanceTag, TrajectoryDataset] = {}
  for provenance in _PLANS:
    ds = load_dataset(directory / provenance.value)
    if ds.provenance is not provenance:
      msg = f"{directory / provenance.value} holds {ds.provenance} frames"
      raise ConfigError(msg)
    if config is not None:
      _check_compatible(ds, config)
    loaded[provenance] = ds
  return Corpora(
    source_expert=loaded[ProvenanceTag.SOURCE_EXPERT],
    source_random=loaded[ProvenanceTag.SOURCE_RANDOM],
    target_random=loaded[ProvenanceTag.TARGET_RANDOM],
  )


def _check_compatible(ds: TrajectoryDataset, config: ExperimentConfig) -> None:
  size = config.network.image_size
  if ds.num_frames == 0:
    msg = f"{ds.provenance} corpus is empty"
    raise ConfigError(msg)
  if ds.image_shape != (size, size):
    msg = f"{ds.provenance} corpus has {ds.image_shape} frames, "
    msg += f"config expects {size}x{size}"
    raise ConfigError(msg)
  if ds.seq_len != config.network.seq_len:
    msg = f"{ds.provenance} corpus uses L={ds.seq_len}, "
    msg += f"config expects {config.network.seq_len}"
    raise ConfigError(msg)
