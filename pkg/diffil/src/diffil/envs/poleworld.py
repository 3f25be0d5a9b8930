"""PoleWorld: a torque-limited pendulum to swing up and balance.

The angle theta is measured from upright and wraps to [-pi, pi); episodes
start hanging down. The source pole is short and strong, drawn white on
dark gray; the target pole is long and weaker, drawn orange on blue. The
evaluation reward (1 + cos theta) / 2 grows toward upright.
"""

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt

from diffil.data.types import DomainTag
from diffil.envs.base import Action, PixelEnv, State, blend, supersample_grid

DT = 0.05
MAX_SPEED = 8.0
START_NOISE = 0.05


@dataclass(frozen=True)
class PoleDomain:
  gravity: float  # g / l
  gain: float  # angular acceleration per unit action
  length: float  # drawn length as a fraction of the half-frame
  background: tuple[float, float, float]
  color: tuple[float, float, float]


DOMAINS = {
  DomainTag.SOURCE: PoleDomain(
    gravity=10.0,
    gain=5.0,
    length=0.6,
    background=(50.0, 50.0, 50.0),
    color=(255.0, 255.0, 255.0),
  ),
  DomainTag.TARGET: PoleDomain(
    gravity=8.0,
    gain=3.5,
    length=0.9,
    background=(30.0, 60.0, 150.0),
    color=(250.0, 160.0, 40.0),
  ),
}


def wrap_angle(theta: float) -> float:
  """Map an angle to [-pi, pi)."""
  return (theta + math.pi) % (2 * math.pi) - math.pi


def pole_step(
  theta: float, omega: float, action: float, params: PoleDomain
) -> tuple[float, float]:
  """Semi-implicit Euler step of the pendulum."""
  accel = params.gravity * math.sin(theta) + params.gain * action
  omega = float(np.clip(omega + DT * accel, -MAX_SPEED, MAX_SPEED))
  return wrap_angle(theta + DT * omega), omega


def swing_up_action(theta: float, omega: float, params: PoleDomain) -> float:
  """Energy pumping far from upright, PD balancing near it."""
  if math.cos(theta) > 0.85:
    torque = -(12.0 * theta + 3.0 * omega) / params.gain
    return float(np.clip(torque, -1.0, 1.0))
  # Zero at rest upright, -2 g/l at rest hanging
  energy = 0.5 * omega**2 + params.gravity * (math.cos(theta) - 1.0)
  direction = 1.0 if omega >= 0 else -1.0
  return float(np.clip(-2.0 * energy * direction, -1.0, 1.0))


def render_pole(
  theta: float, params: PoleDomain, image_size: int
) -> npt.NDArray[np.uint8]:
  """Anti-aliased pole from the frame center; upright points up."""
  size = image_size
  center = size / 2
  length = params.length * center
  half_width = max(size / 32, 0.75)
  tip_x = center + length * math.sin(theta)
  tip_y = center - length * math.cos(theta)
  grid = supersample_grid(size)
  py = grid[:, :, None, None]
  px = grid[None, None, :, :]
  # Distance from each sample to the segment center -> tip
  seg_x, seg_y = tip_x - center, tip_y - center
  proj = ((px - center) * seg_x + (py - center) * seg_y) / (length**2)
  proj = np.clip(proj, 0.0, 1.0)
  dist2 = (px - center - proj * seg_x) ** 2 + (py - center - proj * seg_y) ** 2
  alpha = (dist2 <= half_width**2).mean(axis=(1, 3))
  background = np.broadcast_to(
    np.asarray(params.background), (size, size, 3)
  ).astype(np.float64)
  return blend(background, params.color, alpha)


class PoleWorld(PixelEnv):
  """State [cos theta, sin theta, omega]; action [torque] in [-1, 1]."""

  name = "poleworld"
  state_dim = 3

  def __init__(
    self,
    domain: DomainTag = DomainTag.SOURCE,
    episode_len: int = 200,
    image_size: int = 32,
  ) -> None:
    super().__init__(domain, episode_len, image_size)
    self.params = DOMAINS[self.domain]
    self.theta = math.pi
    self.omega = 0.0

  def _reset_state(self) -> None:
    noise = self.np_random.uniform(-START_NOISE, START_NOISE, size=2)
    self.theta = wrap_angle(math.pi + float(noise[0]))
    self.omega = float(noise[1])

  def _advance(self, action: Action) -> None:
    self.theta, self.omega = pole_step(
      self.theta, self.omega, float(action[0]), self.params
    )

  def _eval_reward(self, action: Action) -> float:
    return (1.0 + math.cos(self.theta)) / 2

  def _observe(self) -> State:
    return np.array(
      [math.cos(self.theta), math.sin(self.theta), self.omega], dtype=np.float32
    )

  def render(self) -> npt.NDArray[np.uint8]:
    return render_pole(self.theta, self.params, self.image_size)

  @staticmethod
  def state_position(state: State) -> float:
    return math.atan2(float(state[1]), float(state[0]))

  @staticmethod
  def position_error(a: float, b: float) -> float:
    """Wrapped angular distance, scaled to [0, 1]."""
    return abs(wrap_angle(a - b)) / math.pi

  def expert_action(self) -> Action:
    return np.array(
      [swing_up_action(self.theta, self.omega, self.params)], dtype=np.float32
    )

  def get_state(self) -> dict[str, Any]:
    return {
      "theta": self.theta,
      "omega": self.omega,
      "t": self.t,
      "clamped_actions": self.clamped_actions,
      "rng": self._rng_state(),
    }

  def set_state(self, state: dict[str, Any]) -> None:
    self.theta = float(state["theta"])
    self.omega = float(state["omega"])
    self.t = int(state["t"])
    self.clamped_actions = int(state["clamped_actions"])
    self._restore_rng(state["rng"])
