"""Tiny experiment configs, corpora and learner transitions."""

from typing import Any

import numpy as np

from diffil.config import ExperimentConfig, build_config
from diffil.data.dataset import Episode
from diffil.data.types import Frame, FrameSequence, ProvenanceTag, Transition
from diffil.envs.corpora import Corpora, generate_corpora
from diffil_testing.fixtures.networks import small_network_config

TINY_EPISODE_LEN = 10


def tiny_config(**overrides: Any) -> ExperimentConfig:
  """A DotWorld config that trains a few iterations in about a second.

  Keyword overrides are merged section-wise, e.g.
  `tiny_config(schedule={"n_iter": 3}, seed=1)`.
  """
  values: dict[str, Any] = {
    "version": 1,
    "network": small_network_config().model_dump(),
    "schedule": {
      "n_iter": 2,
      "n_model_train": 5,
      "n_rl_train": 3,
      "model_batch": 8,
      "rl_batch": 8,
      "refresh_count": 10,
      "learner_prefill": 10,
      "checkpoint_every": 1,
      "eval_episodes": 2,
    },
    "buffers": {
      "source_expert": 40,
      "source_random": 40,
      "target_random": 40,
      "learner": 30,
    },
    "env": {
      "name": "dotworld",
      "episode_len": TINY_EPISODE_LEN,
      "random_episode_len": TINY_EPISODE_LEN,
    },
  }
  return build_config(values, overrides)


def tiny_corpora(config: ExperimentConfig | None = None) -> Corpora:
  return generate_corpora(config or tiny_config())


def random_episode(
  rng: np.random.Generator,
  length: int,
  *,
  episode_len: int | None = None,
  image_size: int = 8,
  state_dim: int = 1,
  action_dim: int = 1,
) -> Episode:
  """Noise frames with random states and actions."""
  return Episode(
    frames=rng.integers(0, 256, size=(length, image_size, image_size, 3)).astype(
      np.uint8
    ),
    episode_len=episode_len or max(length - 1, 1),
    states=rng.normal(size=(length, state_dim)).astype(np.float32),
    actions=rng.uniform(-1, 1, size=(length - 1, action_dim)).astype(np.float32),
  )


def make_transition(
  tag: int,
  *,
  seq_len: int = 2,
  image_size: int = 4,
  t: int = 1,
  episode_len: int = TINY_EPISODE_LEN,
) -> Transition:
  """A learner transition whose state, action and pixels all encode `tag`.

  The tag survives a round trip through the buffer, so FIFO order can be
  read back from `transition.state[0]`.
  """
  pixel = np.uint8(tag % 256)
  timesteps = [max(t - seq_len + 1 + i, 0) for i in range(seq_len)]
  frames = tuple(
    Frame(
      pixels=np.full((image_size, image_size, 3), pixel, dtype=np.uint8),
      t=step,
      episode_len=episode_len,
      provenance=ProvenanceTag.TARGET_LEARNER,
    )
    for step in timesteps
  )
  return Transition(
    state=np.array([float(tag)], dtype=np.float32),
    action=np.array([0.0], dtype=np.float32),
    next_state=np.array([float(tag) + 0.5], dtype=np.float32),
    obs_seq=FrameSequence(frames),
  )
