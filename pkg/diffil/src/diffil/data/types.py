"""Core records shared by every DIFF-IL module.

Pixels stay uint8 [H, W, 3] inside these records; conversion to floats in
[0, 1] happens at the network boundary (see `diffil.perception`).
"""

from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import numpy.typing as npt

DEFAULT_SEQ_LEN = 4


class DomainTag(StrEnum):
  """Which environment a frame was rendered in."""

  SOURCE = "source"
  TARGET = "target"

  @property
  def opposite(self) -> "DomainTag":
    return DomainTag.TARGET if self is DomainTag.SOURCE else DomainTag.SOURCE


class ProvenanceTag(StrEnum):
  """Which policy produced a frame."""

  SOURCE_EXPERT = "source_expert"
  SOURCE_RANDOM = "source_random"
  TARGET_RANDOM = "target_random"
  TARGET_LEARNER = "target_learner"

  @property
  def domain(self) -> DomainTag:
    return DomainTag.SOURCE if self.name.startswith("SOURCE") else DomainTag.TARGET

  @property
  def is_expert(self) -> bool:
    return self is ProvenanceTag.SOURCE_EXPERT


@dataclass(frozen=True, eq=False)
class Frame:
  """A single pixel observation with its timestep and provenance.

  Attributes:
      pixels: uint8 array [H, W, 3].
      t: Timestep within the episode, 0 <= t <= episode_len.
      episode_len: Episode length H_tau used for time labels.
      provenance: Producing policy; the domain follows from it.
  """

  pixels: npt.NDArray[np.uint8]
  t: int
  episode_len: int
  provenance: ProvenanceTag

  def __post_init__(self) -> None:
    if self.pixels.dtype != np.uint8 or self.pixels.ndim != 3:
      msg = f"pixels must be uint8 [H, W, 3], got {self.pixels.dtype}"
      msg += f" {self.pixels.shape}"
      raise ValueError(msg)
    if self.pixels.shape[2] != 3:
      msg = f"pixels must have 3 channels, got {self.pixels.shape}"
      raise ValueError(msg)
    if self.episode_len < 1:
      msg = f"episode_len must be >= 1, got {self.episode_len}"
      raise ValueError(msg)
    if not 0 <= self.t <= self.episode_len:
      msg = f"t={self.t} outside [0, {self.episode_len}]"
      raise ValueError(msg)

  @property
  def domain(self) -> DomainTag:
    return self.provenance.domain


@dataclass(frozen=True, eq=False)
class FrameSequence:
  """L frames of one episode ending at timestep t (oldest first).

  Sequences that start before the episode are left-padded with frame 0, so
  the timesteps read e.g. [0, 0, 1, 2].
  """

  frames: tuple[Frame, ...]

  def __post_init__(self) -> None:
    if not self.frames:
      raise ValueError("a frame sequence needs at least one frame")
    first = self.frames[0]
    shape = first.pixels.shape
    for frame in self.frames[1:]:
      if frame.provenance is not first.provenance:
        raise ValueError("frames of a sequence must share provenance")
      if frame.episode_len != first.episode_len:
        raise ValueError("frames of a sequence must share the episode")
      if frame.pixels.shape != shape:
        raise ValueError("frames of a sequence must share H, W")
    timesteps = [frame.t for frame in self.frames]
    # Leading repeats of the first frame are padding; the rest is consecutive.
    start = 0
    while start + 1 < len(timesteps) and timesteps[start + 1] == timesteps[0]:
      start += 1
    if start > 0 and timesteps[0] != 0:
      raise ValueError(f"only frame 0 may be repeated as padding: {timesteps}")
    tail = timesteps[start:]
    if any(b - a != 1 for a, b in zip(tail, tail[1:], strict=False)):
      raise ValueError(f"timesteps must be consecutive: {timesteps}")

  @property
  def seq_len(self) -> int:
    return len(self.frames)

  @property
  def t(self) -> int:
    return self.frames[-1].t

  @property
  def provenance(self) -> ProvenanceTag:
    return self.frames[0].provenance

  @property
  def domain(self) -> DomainTag:
    return self.provenance.domain

  @property
  def last(self) -> Frame:
    return self.frames[-1]

  def pixels(self) -> npt.NDArray[np.uint8]:
    """Stack the frames into a uint8 array [L, H, W, 3]."""
    return np.stack([frame.pixels for frame in self.frames])


def sequence_indices(t: int, seq_len: int) -> npt.NDArray[np.int64]:
  """Frame indices t-L+1..t with negative indices replaced by 0."""
  return np.maximum(np.arange(t - seq_len + 1, t + 1, dtype=np.int64), 0)


def pad_sequence(
  episode_frames: Sequence[Frame], t: int, seq_len: int = DEFAULT_SEQ_LEN
) -> FrameSequence:
  """Build the observation sequence ending at timestep t.

  Args:
      episode_frames: Frames of one episode, indexed by timestep.
      t: Index of the last frame of the sequence.
      seq_len: Sequence length L.

  Returns:
      Frames t-L+1..t, with indices below 0 replaced by frame 0.

  Raises:
      IndexError: If t is outside the episode.
      ValueError: If seq_len < 1.
  """
  if seq_len < 1:
    msg = f"seq_len must be >= 1, got {seq_len}"
    raise ValueError(msg)
  if not 0 <= t < len(episode_frames):
    msg = f"t={t} out of range for an episode of {len(episode_frames)} frames"
    raise IndexError(msg)
  return FrameSequence(
    tuple(episode_frames[i] for i in sequence_indices(t, seq_len))
  )


@dataclass(frozen=True, eq=False)
class Transition:
  """One learner step in the target environment.

  The reward is not stored; it is recomputed from the current label networks
  whenever the transition is sampled for an SAC update.
  """

  state: npt.NDArray[np.float32]
  action: npt.NDArray[np.float32]
  next_state: npt.NDArray[np.float32]
  obs_seq: FrameSequence
  done: bool = False

  def __post_init__(self) -> None:
    if self.obs_seq.provenance is not ProvenanceTag.TARGET_LEARNER:
      msg = "learner transitions need target_learner frames, got "
      msg += f"{self.obs_seq.provenance}"
      raise ValueError(msg)
    if self.state.shape != self.next_state.shape:
      raise ValueError("state and next_state shapes differ")
    for name in ("state", "action", "next_state"):
      value = getattr(self, name)
      if not np.all(np.isfinite(value)):
        msg = f"{name} must be finite"
        raise ValueError(msg)
    if np.any(np.abs(self.action) > 1.0):
      raise ValueError("action must lie in [-1, 1]")


@dataclass
class FrameBatch:
  """A model-training batch of observation sequences from one domain.

  Attributes:
      seq_pixels: uint8 [B, L, H, W, 3]; the last frame is the sample's frame.
      t: int [B] timestep of the last frame.
      episode_len: int [B] episode length H_tau.
      provenance: Producing policy per sample.
  """

  seq_pixels: npt.NDArray[np.uint8]
  t: npt.NDArray[np.int64]
  episode_len: npt.NDArray[np.int64]
  provenance: list[ProvenanceTag] = field(default_factory=list)

  def __len__(self) -> int:
    return int(self.seq_pixels.shape[0])

  @property
  def frame_pixels(self) -> npt.NDArray[np.uint8]:
    return self.seq_pixels[:, -1]

  @property
  def domains(self) -> list[DomainTag]:
    return [p.domain for p in self.provenance]

  @property
  def is_expert(self) -> npt.NDArray[np.bool_]:
    return np.array([p.is_expert for p in self.provenance], dtype=bool)

  @classmethod
  def concat(cls, batches: Sequence["FrameBatch"]) -> "FrameBatch":
    """Concatenate batches in order; provenance stays per sample."""
    return cls(
      seq_pixels=np.concatenate([b.seq_pixels for b in batches]),
      t=np.concatenate([b.t for b in batches]),
      episode_len=np.concatenate([b.episode_len for b in batches]),
      provenance=[p for b in batches for p in b.provenance],
    )

  def take(self, indices: npt.NDArray[np.int64]) -> "FrameBatch":
    """Samples at `indices`, in that order."""
    return FrameBatch(
      seq_pixels=self.seq_pixels[indices],
      t=self.t[indices],
      episode_len=self.episode_len[indices],
      provenance=[self.provenance[int(i)] for i in indices],
    )


@dataclass
class TransitionBatch:
  """Column-wise batch of learner transitions."""

  states: npt.NDArray[np.float32]
  actions: npt.NDArray[np.float32]
  next_states: npt.NDArray[np.float32]
  obs_seq: npt.NDArray[np.uint8]
  done: npt.NDArray[np.float32]

  def __len__(self) -> int:
    return int(self.states.shape[0])
