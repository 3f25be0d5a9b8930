"""Test fixtures package.

Provides miniature networks, closed-form critics and label nets, and tiny
configs and corpora for unit tests.
"""

from diffil_testing.fixtures.corpora import (
  TINY_EPISODE_LEN,
  make_transition,
  random_episode,
  tiny_config,
  tiny_corpora,
)
from diffil_testing.fixtures.networks import (
  ConstantLabelNet,
  LinearCritic,
  LookupLabelNet,
  miniature_network_config,
  small_network_config,
)

__all__ = [
  "TINY_EPISODE_LEN",
  "ConstantLabelNet",
  "LinearCritic",
  "LookupLabelNet",
  "make_transition",
  "miniature_network_config",
  "random_episode",
  "small_network_config",
  "tiny_config",
  "tiny_corpora",
]
