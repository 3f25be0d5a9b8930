"""Paired source/target pixel environments and corpus generation."""

from diffil.envs.base import PixelEnv
from diffil.envs.corpora import (
  Corpora,
  EpisodeRecord,
  expert_policy,
  generate_corpora,
  generate_corpus,
  load_corpora,
  rollout,
  save_corpora,
  uniform_policy,
)
from diffil.envs.dotworld import DotWorld
from diffil.envs.poleworld import PoleWorld
from diffil.envs.registry import ENVIRONMENTS, make_env

__all__ = [
  "ENVIRONMENTS",
  "Corpora",
  "DotWorld",
  "EpisodeRecord",
  "PixelEnv",
  "PoleWorld",
  "expert_policy",
  "generate_corpora",
  "generate_corpus",
  "load_corpora",
  "make_env",
  "rollout",
  "save_corpora",
  "uniform_policy",
]
