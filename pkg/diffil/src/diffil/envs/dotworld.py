"""DotWorld: a dot moving along a line.

Both domains share the task coordinate x in [0, 1] but differ in speed and
looks: the source renders a white square on flat gray and moves with gain
0.05, the target renders a white disc on a checkerboard and moves with gain
0.03. The evaluation reward is the commanded forward velocity g * a.
"""

from typing import Any

import numpy as np
import numpy.typing as npt

from diffil.data.types import DomainTag
from diffil.envs.base import (
  Action,
  PixelEnv,
  State,
  blend,
  checkerboard,
  coverage,
  supersample_grid,
)

GAINS = {DomainTag.SOURCE: 0.05, DomainTag.TARGET: 0.03}
START_RANGE = 0.05

_SOURCE_BACKGROUND = 128.0
_TARGET_LEVELS = (40.0, 200.0)
_WHITE = (255.0, 255.0, 255.0)


def dot_step(x: float, action: float, gain: float) -> float:
  """x' = clamp(x + gain * a, 0, 1)."""
  return float(np.clip(x + gain * action, 0.0, 1.0))


def render_dot(x: float, domain: DomainTag, image_size: int) -> npt.NDArray[np.uint8]:
  """Anti-aliased frame of the dot at x; distinct x give distinct frames."""
  size = image_size
  if domain is DomainTag.SOURCE:
    side = size / 4
    left = x * (size - side)
    top = (size - side) / 2
    alpha = np.outer(coverage(top, top + side, size), coverage(left, left + side, size))
    background = np.full((size, size, 3), _SOURCE_BACKGROUND)
    return blend(background, _WHITE, alpha)

  radius = size / 8
  cx = radius + x * (size - 2 * radius)
  cy = size / 2
  grid = supersample_grid(size)
  # [rows, sub, cols, sub] inside-disc mask averaged per pixel
  dy = (grid - cy)[:, :, None, None]
  dx = (grid - cx)[None, None, :, :]
  alpha = ((dx**2 + dy**2) <= radius**2).mean(axis=(1, 3))
  background = checkerboard(size, max(size // 8, 1), _TARGET_LEVELS)
  return blend(background, _WHITE, alpha)


class DotWorld(PixelEnv):
  """State [x]; action [a] in [-1, 1]; x' = clamp(x + g * a)."""

  name = "dotworld"
  state_dim = 1

  def __init__(
    self,
    domain: DomainTag = DomainTag.SOURCE,
    episode_len: int = 50,
    image_size: int = 32,
  ) -> None:
    super().__init__(domain, episode_len, image_size)
    self.gain = GAINS[self.domain]
    self.x = 0.0

  def _reset_state(self) -> None:
    self.x = float(self.np_random.uniform(0.0, START_RANGE))

  def _advance(self, action: Action) -> None:
    self.x = dot_step(self.x, float(action[0]), self.gain)

  def _eval_reward(self, action: Action) -> float:
    # Commanded velocity, also when the dot sits against a wall
    return self.gain * float(action[0])

  def _observe(self) -> State:
    return np.array([self.x], dtype=np.float32)

  def render(self) -> npt.NDArray[np.uint8]:
    return render_dot(self.x, self.domain, self.image_size)

  @staticmethod
  def state_position(state: State) -> float:
    return float(state[0])

  @staticmethod
  def position_error(a: float, b: float) -> float:
    return abs(a - b)

  def expert_action(self) -> Action:
    return np.ones(1, dtype=np.float32)

  def get_state(self) -> dict[str, Any]:
    return {
      "x": self.x,
      "t": self.t,
      "clamped_actions": self.clamped_actions,
      "rng": self._rng_state(),
    }

  def set_state(self, state: dict[str, Any]) -> None:
    self.x = float(state["x"])
    self.t = int(state["t"])
    self.clamped_actions = int(state["clamped_actions"])
    self._restore_rng(state["rng"])
