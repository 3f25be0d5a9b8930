"""Common base for the paired pixel environments.

Each environment exposes its proprioceptive state as the gymnasium
observation and renders an RGB frame for the reward pipeline. The step
reward is the ground-truth evaluation reward: it feeds the metrics log
only and never reaches the learner.
"""

from abc import abstractmethod
from typing import Any, ClassVar

import gymnasium as gym
import numpy as np
import numpy.typing as npt
from gymnasium import spaces

from diffil.data.types import DomainTag
from diffil.logging import get_logger

logger = get_logger("envs")

State = npt.NDArray[np.float32]
Action = npt.NDArray[np.float32]


class PixelEnv(gym.Env[State, Action]):
  """A deterministic environment with a source and a target rendition.

  Subclasses implement `_reset_state`, `_advance`, `_eval_reward`, `_observe`
  and `render`; actions outside [-1, 1] are clamped and counted.

  Attributes:
      domain: Which rendition (and dynamics) this instance uses.
      episode_len: Steps per episode H_tau; the episode truncates after it.
      image_size: Height and width of rendered frames.
      clamped_actions: Number of out-of-bounds actions seen so far.
  """

  metadata: ClassVar[dict[str, Any]] = {"render_modes": ["rgb_array"]}
  name: ClassVar[str]
  state_dim: ClassVar[int]
  action_dim: ClassVar[int] = 1

  def __init__(self, domain: DomainTag, episode_len: int, image_size: int) -> None:
    super().__init__()
    if episode_len < 1:
      msg = f"episode_len must be >= 1, got {episode_len}"
      raise ValueError(msg)
    self.domain = DomainTag(domain)
    self.episode_len = episode_len
    self.image_size = image_size
    self.render_mode = "rgb_array"
    self.clamped_actions = 0
    self.t = 0
    self.action_space = spaces.Box(-1.0, 1.0, (self.action_dim,), dtype=np.float32)
    self.observation_space = spaces.Box(
      -np.inf, np.inf, (self.state_dim,), dtype=np.float32
    )

  def reset(
    self, *, seed: int | None = None, options: dict[str, Any] | None = None
  ) -> tuple[State, dict[str, Any]]:
    super().reset(seed=seed)
    self.t = 0
    self._reset_state()
    return self._observe(), {"t": self.t}

  def step(self, action: Action) -> tuple[State, float, bool, bool, dict[str, Any]]:
    """Advance one step.

    Returns:
        (state', eval_reward, terminated, truncated, info). Episodes never
        terminate; they truncate after `episode_len` steps.
    """
    raw = np.asarray(action, dtype=np.float32).reshape(self.action_dim)
    clipped = np.clip(raw, -1.0, 1.0)
    if not np.array_equal(raw, clipped):
      self.clamped_actions += 1
      logger.debug("Clamped out-of-bounds action %s", raw.tolist())
    reward = self._eval_reward(clipped)
    self._advance(clipped)
    self.t += 1
    truncated = self.t >= self.episode_len
    return self._observe(), reward, False, truncated, {"t": self.t}

  @abstractmethod
  def _reset_state(self) -> None: ...

  @abstractmethod
  def _advance(self, action: Action) -> None: ...

  @abstractmethod
  def _eval_reward(self, action: Action) -> float: ...

  @abstractmethod
  def _observe(self) -> State: ...

  @abstractmethod
  def render(self) -> npt.NDArray[np.uint8]:  # type: ignore[override]
    """Current frame, uint8 [image_size, image_size, 3]."""

  def observation(self) -> State:
    """The current state vector, as `reset` and `step` return it."""
    return self._observe()

  def position(self) -> float:
    """Ground-truth task coordinate used to score cross-domain mappings."""
    return self.state_position(self._observe())

  @staticmethod
  @abstractmethod
  def state_position(state: State) -> float:
    """Task coordinate recovered from a state vector."""

  @staticmethod
  @abstractmethod
  def position_error(a: float, b: float) -> float:
    """Distance between two task coordinates."""

  @abstractmethod
  def expert_action(self) -> Action:
    """Scripted expert action for the current state."""

  @abstractmethod
  def get_state(self) -> dict[str, Any]:
    """Full simulator state, including the episode RNG."""

  @abstractmethod
  def set_state(self, state: dict[str, Any]) -> None: ...

  def _rng_state(self) -> dict[str, Any]:
    return self.np_random.bit_generator.state

  def _restore_rng(self, state: dict[str, Any]) -> None:
    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = state
    self.np_random = rng


def coverage(lo: float, hi: float, n: int) -> npt.NDArray[np.float64]:
  """Fraction of each unit cell [i, i+1), i < n, covered by [lo, hi)."""
  cells = np.arange(n, dtype=np.float64)
  return np.clip(np.minimum(cells + 1, hi) - np.maximum(cells, lo), 0.0, 1.0)


def supersample_grid(n: int, factor: int = 4) -> npt.NDArray[np.float64]:
  """Sample coordinates inside each of n unit cells, shape [n, factor]."""
  offsets = (np.arange(factor) + 0.5) / factor
  return np.arange(n, dtype=np.float64)[:, None] + offsets[None, :]


def blend(
  background: npt.NDArray[np.float64],
  color: tuple[float, float, float],
  alpha: npt.NDArray[np.float64],
) -> npt.NDArray[np.uint8]:
  """Alpha-blend a solid color over an [H, W, 3] background, round to uint8."""
  out = background * (1 - alpha[..., None]) + np.asarray(color) * alpha[..., None]
  return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def checkerboard(
  size: int, check: int, levels: tuple[float, float]
) -> npt.NDArray[np.float64]:
  """[size, size, 3] checkerboard alternating between two gray levels."""
  idx = np.arange(size) // max(check, 1)
  parity = (idx[:, None] + idx[None, :]) % 2
  gray = np.where(parity == 0, levels[0], levels[1]).astype(np.float64)
  return np.repeat(gray[..., None], 3, axis=-1)
