"""FIFO learner buffer.

Transitions are kept column-wise in preallocated ring arrays. Inserting
beyond capacity evicts the oldest transitions first, so the content is
always the last `capacity` transitions inserted.
"""

from collections.abc import Sequence
from typing import Any

import numpy as np
import numpy.typing as npt

from diffil.data.types import (
  Frame,
  FrameBatch,
  FrameSequence,
  ProvenanceTag,
  Transition,
  TransitionBatch,
)

DEFAULT_CAPACITY = 50_000


class LearnerBuffer:
  """Fixed-capacity FIFO of learner transitions.

  Storage is allocated lazily on the first insert, when the state, action
  and observation shapes become known.

  Attributes:
      capacity: Maximum number of transitions held.
      total_inserted: Transitions inserted over the buffer's lifetime.

  Example:
      buffer = LearnerBuffer(capacity=10)
      evicted = buffer.refresh(transitions)
      batch = buffer.sample(rng, 64)
  """

  def __init__(self, capacity: int = DEFAULT_CAPACITY) -> None:
    if capacity < 1:
      msg = f"capacity must be >= 1, got {capacity}"
      raise ValueError(msg)
    self.capacity = capacity
    self.total_inserted = 0
    self._head = 0  # slot of the oldest transition
    self._size = 0
    self._columns: dict[str, npt.NDArray[Any]] = {}

  def __len__(self) -> int:
    return self._size

  @property
  def is_full(self) -> bool:
    return self._size == self.capacity

  def _allocate(self, transition: Transition) -> None:
    seq = transition.obs_seq
    c = self.capacity
    self._columns = {
      "states": np.zeros((c, *transition.state.shape), dtype=np.float32),
      "actions": np.zeros((c, *transition.action.shape), dtype=np.float32),
      "next_states": np.zeros((c, *transition.state.shape), dtype=np.float32),
      "obs_seq": np.zeros((c, *seq.pixels().shape), dtype=np.uint8),
      "obs_t": np.zeros((c, seq.seq_len), dtype=np.int64),
      "episode_len": np.zeros(c, dtype=np.int64),
      "done": np.zeros(c, dtype=np.float32),
    }

  def add(self, transition: Transition) -> bool:
    """Insert one transition, evicting the oldest if full.

    Returns:
        True if a transition was evicted.
    """
    if not self._columns:
      self._allocate(transition)
    if self._size == self.capacity:
      slot = self._head
      self._head = (self._head + 1) % self.capacity
      evicted = True
    else:
      slot = (self._head + self._size) % self.capacity
      self._size += 1
      evicted = False

    cols = self._columns
    cols["states"][slot] = transition.state
    cols["actions"][slot] = transition.action
    cols["next_states"][slot] = transition.next_state
    cols["obs_seq"][slot] = transition.obs_seq.pixels()
    cols["obs_t"][slot] = [frame.t for frame in transition.obs_seq.frames]
    cols["episode_len"][slot] = transition.obs_seq.last.episode_len
    cols["done"][slot] = float(transition.done)
    self.total_inserted += 1
    return evicted

  def refresh(self, new: Sequence[Transition]) -> int:
    """Insert a block of new transitions, evicting the oldest.

    Args:
        new: Transitions in insertion order.

    Returns:
        Number of transitions evicted, max(0, size + len(new) - capacity).

    Raises:
        ValueError: If the block is larger than the buffer.
    """
    if len(new) > self.capacity:
      msg = f"refresh of {len(new)} exceeds capacity {self.capacity}"
      raise ValueError(msg)
    return sum(self.add(transition) for transition in new)

  def _slots(self, positions: npt.NDArray[np.int64]) -> npt.NDArray[np.int64]:
    return (self._head + positions) % self.capacity

  def get(self, position: int) -> Transition:
    """Return the transition at FIFO position (0 = oldest)."""
    if not 0 <= position < self._size:
      msg = f"position {position} out of range for {self._size} transitions"
      raise IndexError(msg)
    slot = int(self._slots(np.array([position]))[0])
    cols = self._columns
    episode_len = int(cols["episode_len"][slot])
    frames = tuple(
      Frame(
        pixels=cols["obs_seq"][slot, i].copy(),
        t=int(t),
        episode_len=episode_len,
        provenance=ProvenanceTag.TARGET_LEARNER,
      )
      for i, t in enumerate(cols["obs_t"][slot])
    )
    return Transition(
      state=cols["states"][slot].copy(),
      action=cols["actions"][slot].copy(),
      next_state=cols["next_states"][slot].copy(),
      obs_seq=FrameSequence(frames),
      done=bool(cols["done"][slot]),
    )

  def transitions(self) -> list[Transition]:
    """All transitions, oldest first."""
    return [self.get(i) for i in range(self._size)]

  def batch(self, positions: npt.NDArray[np.int64]) -> TransitionBatch:
    """Gather transitions at FIFO positions into a column batch."""
    slots = self._slots(positions)
    cols = self._columns
    return TransitionBatch(
      states=cols["states"][slots],
      actions=cols["actions"][slots],
      next_states=cols["next_states"][slots],
      obs_seq=cols["obs_seq"][slots],
      done=cols["done"][slots],
    )

  def frame_batch(self, positions: npt.NDArray[np.int64]) -> FrameBatch:
    """Observation sequences at FIFO positions, as a model-training batch."""
    slots = self._slots(positions)
    cols = self._columns
    return FrameBatch(
      seq_pixels=cols["obs_seq"][slots],
      t=cols["obs_t"][slots, -1],
      episode_len=cols["episode_len"][slots],
      provenance=[ProvenanceTag.TARGET_LEARNER] * len(slots),
    )

  def sample(self, rng: np.random.Generator, batch_size: int) -> TransitionBatch:
    """Uniformly sample a batch (with replacement).

    Raises:
        ValueError: If the buffer is empty.
    """
    if self._size == 0:
      raise ValueError("cannot sample from an empty learner buffer")
    return self.batch(rng.integers(0, self._size, size=batch_size))

  def last_frames(self, count: int) -> npt.NDArray[np.uint8]:
    """Last observation frame of the newest `count` transitions [N, H, W, 3]."""
    count = min(count, self._size)
    positions = np.arange(self._size - count, self._size, dtype=np.int64)
    return self._columns["obs_seq"][self._slots(positions), -1]

  def state_dict(self) -> dict[str, Any]:
    """Snapshot of the buffer for run-state checkpoints (oldest first)."""
    positions = np.arange(self._size, dtype=np.int64)
    return {
      "capacity": self.capacity,
      "total_inserted": self.total_inserted,
      "columns": {
        name: column[self._slots(positions)].copy()
        for name, column in self._columns.items()
      },
    }

  def load_state_dict(self, state: dict[str, Any]) -> None:
    """Restore a snapshot written by `state_dict`."""
    self.capacity = int(state["capacity"])
    self.total_inserted = int(state["total_inserted"])
    columns: dict[str, npt.NDArray[Any]] = state["columns"]
    self._head = 0
    self._size = len(columns["states"]) if columns else 0
    self._columns = {}
    for name, column in columns.items():
      full = np.zeros((self.capacity, *column.shape[1:]), dtype=column.dtype)
      full[: len(column)] = column
      self._columns[name] = full


def buffer_refresh(buf: LearnerBuffer, new: Sequence[Transition]) -> LearnerBuffer:
  """Insert `new` into `buf` with FIFO eviction and return the buffer."""
  buf.refresh(new)
  return buf
