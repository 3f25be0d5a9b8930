"""DIFF-IL Testing Utilities.

Provides gradient oracles, fixtures and fakes for testing DIFF-IL components.
"""

from diffil_testing.fixtures import (
  TINY_EPISODE_LEN,
  ConstantLabelNet,
  LinearCritic,
  LookupLabelNet,
  make_transition,
  miniature_network_config,
  random_episode,
  small_network_config,
  tiny_config,
  tiny_corpora,
)
from diffil_testing.helpers import input_gradcheck, param_gradcheck

__all__ = [
  "TINY_EPISODE_LEN",
  "ConstantLabelNet",
  "LinearCritic",
  "LookupLabelNet",
  "input_gradcheck",
  "make_transition",
  "miniature_network_config",
  "param_gradcheck",
  "random_episode",
  "small_network_config",
  "tiny_config",
  "tiny_corpora",
]
