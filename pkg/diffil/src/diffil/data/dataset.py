"""Offline trajectory corpora and their on-disk container.

A corpus directory holds `manifest.toml` (format "diffil-v1") plus one raw
uint8 blob per episode in row-major [T, H, W, 3] order, with optional
float32 state and action arrays next to it.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import tomlkit
from tomlkit.exceptions import TOMLKitError

from diffil.data.types import (
  DEFAULT_SEQ_LEN,
  Frame,
  FrameBatch,
  FrameSequence,
  ProvenanceTag,
  pad_sequence,
)
from diffil.errors import DataFormatError
from diffil.logging import get_logger

logger = get_logger("data.dataset")

FORMAT_VERSION = "diffil-v1"
MANIFEST_NAME = "manifest.toml"
DEFAULT_CAPACITY = 50_000


@dataclass(eq=False)
class Episode:
  """One contiguous episode of frames.

  Attributes:
      frames: uint8 [T, H, W, 3]; frame i is the observation at timestep i.
      episode_len: Nominal episode length H_tau (T <= H_tau + 1; the last
          episode of a full corpus may be cut short).
      states: Optional float32 [T, S] proprioceptive states.
      actions: Optional float32 [T - 1, A]; action i is taken after frame i.
  """

  frames: npt.NDArray[np.uint8]
  episode_len: int
  states: npt.NDArray[np.float32] | None = None
  actions: npt.NDArray[np.float32] | None = None

  def __post_init__(self) -> None:
    if self.frames.dtype != np.uint8 or self.frames.ndim != 4:
      raise ValueError("episode frames must be uint8 [T, H, W, 3]")
    if len(self.frames) == 0:
      raise ValueError("an episode needs at least one frame")
    if len(self.frames) > self.episode_len + 1:
      msg = f"{len(self.frames)} frames exceed episode_len + 1"
      raise ValueError(msg)
    if self.states is not None and len(self.states) != len(self.frames):
      raise ValueError("states must parallel frames")
    if self.actions is not None and len(self.actions) != len(self.frames) - 1:
      raise ValueError("actions must have one row per step (T - 1)")

  def __len__(self) -> int:
    return int(self.frames.shape[0])

  def truncated(self, length: int) -> "Episode":
    """The first `length` frames of the episode."""
    return Episode(
      frames=self.frames[:length],
      episode_len=self.episode_len,
      states=None if self.states is None else self.states[:length],
      actions=None if self.actions is None else self.actions[: max(length - 1, 0)],
    )


class TrajectoryDataset:
  """A fixed-capacity corpus of episodes from one policy.

  Attributes:
      provenance: Producing policy of every frame.
      capacity: Maximum total number of frames.
      seq_len: Sequence length L used when sampling.
      episodes: Episodes in insertion order.
  """

  def __init__(
    self,
    provenance: ProvenanceTag,
    capacity: int = DEFAULT_CAPACITY,
    seq_len: int = DEFAULT_SEQ_LEN,
    episodes: list[Episode] | None = None,
  ) -> None:
    self.provenance = provenance
    self.capacity = capacity
    self.seq_len = seq_len
    self.episodes: list[Episode] = []
    self._starts: npt.NDArray[np.int64] = np.zeros(0, dtype=np.int64)
    self._num_frames = 0
    self._flat: npt.NDArray[np.uint8] | None = None
    for episode in episodes or []:
      self.add_episode(episode)

  def __len__(self) -> int:
    return self.num_frames

  @property
  def num_frames(self) -> int:
    return self._num_frames

  @property
  def remaining(self) -> int:
    return self.capacity - self.num_frames

  @property
  def image_shape(self) -> tuple[int, int]:
    if not self.episodes:
      raise ValueError("empty dataset has no image shape")
    _, h, w, _ = self.episodes[0].frames.shape
    return int(h), int(w)

  def add_episode(self, episode: Episode) -> None:
    """Append an episode.

    Raises:
        ValueError: If the episode does not fit the remaining capacity or its
            image size differs from the corpus.
    """
    if len(episode) > self.remaining:
      msg = f"episode of {len(episode)} frames exceeds remaining capacity "
      msg += f"{self.remaining}"
      raise ValueError(msg)
    if self.episodes and episode.frames.shape[1:] != self.episodes[0].frames.shape[1:]:
      raise ValueError("all episodes of a corpus share the image size")
    self.episodes.append(episode)
    self._starts = np.append(self._starts, self._num_frames)
    self._num_frames += len(episode)
    self._flat = None

  def frames(self, episode_index: int) -> list[Frame]:
    """The frames of one episode as `Frame` records."""
    episode = self.episodes[episode_index]
    return [
      Frame(
        pixels=episode.frames[t],
        t=t,
        episode_len=episode.episode_len,
        provenance=self.provenance,
      )
      for t in range(len(episode))
    ]

  def sequence(self, episode_index: int, t: int) -> FrameSequence:
    """The padded observation sequence ending at (episode, t)."""
    return pad_sequence(self.frames(episode_index), t, self.seq_len)

  def all_frames(self) -> npt.NDArray[np.uint8]:
    """Every frame of the corpus concatenated [N, H, W, 3] (cached)."""
    if self._flat is None:
      self._flat = np.concatenate([episode.frames for episode in self.episodes])
    return self._flat

  def timesteps(self) -> npt.NDArray[np.int64]:
    """Timestep of every frame, parallel to `all_frames`."""
    return np.concatenate(
      [np.arange(len(episode), dtype=np.int64) for episode in self.episodes]
    )

  def all_states(self) -> npt.NDArray[np.float32] | None:
    """Every state of the corpus [N, S], or None if states were not stored."""
    if not self.episodes or any(e.states is None for e in self.episodes):
      return None
    return np.concatenate([e.states for e in self.episodes if e.states is not None])

  def locate(self, flat_index: npt.NDArray[np.int64]) -> tuple[
    npt.NDArray[np.int64], npt.NDArray[np.int64]
  ]:
    """Map flat frame indices to (episode index, timestep)."""
    episode_index = np.searchsorted(self._starts, flat_index, side="right") - 1
    return episode_index, flat_index - self._starts[episode_index]

  def gather(self, flat_index: npt.NDArray[np.int64]) -> FrameBatch:
    """Padded observation sequences ending at the given flat frame indices."""
    if self.num_frames == 0:
      raise ValueError("cannot gather from an empty dataset")
    episode_index, t = self.locate(flat_index)
    offsets = np.arange(-self.seq_len + 1, 1, dtype=np.int64)
    local = np.maximum(t[:, None] + offsets[None, :], 0)
    seq_pixels = self.all_frames()[self._starts[episode_index][:, None] + local]
    episode_len = np.array(
      [self.episodes[i].episode_len for i in episode_index], dtype=np.int64
    )
    return FrameBatch(
      seq_pixels=seq_pixels,
      t=t,
      episode_len=episode_len,
      provenance=[self.provenance] * len(flat_index),
    )

  def sample(self, rng: np.random.Generator, batch_size: int) -> FrameBatch:
    """Uniformly sample padded sequences over all frames."""
    return self.gather(rng.integers(0, self.num_frames, size=batch_size))

  def equals(self, other: "TrajectoryDataset") -> bool:
    """Exact equality of metadata, pixels, states and actions."""
    if (
      self.provenance is not other.provenance
      or self.capacity != other.capacity
      or self.seq_len != other.seq_len
      or len(self.episodes) != len(other.episodes)
    ):
      return False
    for a, b in zip(self.episodes, other.episodes, strict=True):
      if a.episode_len != b.episode_len or not np.array_equal(a.frames, b.frames):
        return False
      for x, y in ((a.states, b.states), (a.actions, b.actions)):
        if (x is None) != (y is None):
          return False
        if x is not None and y is not None and not np.array_equal(x, y):
          return False
    return True


def _blob_name(index: int, kind: str) -> str:
  return f"episode_{index:05d}.{kind}"


def save_dataset(ds: TrajectoryDataset, path: Path) -> None:
  """Write a corpus to `path` (a directory, created if missing).

  Args:
      ds: The corpus to write.
      path: Target directory.
  """
  path.mkdir(parents=True, exist_ok=True)
  height, width = ds.image_shape if ds.episodes else (0, 0)

  doc = tomlkit.document()
  doc.add(tomlkit.comment("DIFF-IL trajectory corpus"))
  doc["format"] = FORMAT_VERSION
  doc["provenance"] = ds.provenance.value
  doc["domain"] = ds.provenance.domain.value
  doc["height"] = height
  doc["width"] = width
  doc["seq_len"] = ds.seq_len
  doc["capacity"] = ds.capacity
  doc["num_episodes"] = len(ds.episodes)
  doc["num_frames"] = ds.num_frames

  entries = tomlkit.aot()
  for index, episode in enumerate(ds.episodes):
    entry = tomlkit.table()
    entry["index"] = index
    entry["length"] = len(episode)
    entry["episode_len"] = episode.episode_len
    entry["pixels"] = _blob_name(index, "pixels")
    episode.frames.astype(np.uint8).tofile(path / _blob_name(index, "pixels"))
    if episode.states is not None:
      entry["state_dim"] = int(episode.states.shape[1])
      episode.states.astype("<f4").tofile(path / _blob_name(index, "states"))
    if episode.actions is not None:
      entry["action_dim"] = int(episode.actions.shape[1])
      episode.actions.astype("<f4").tofile(path / _blob_name(index, "actions"))
    entries.append(entry)
  doc["episodes"] = entries

  (path / MANIFEST_NAME).write_text(tomlkit.dumps(doc))
  logger.debug(
    "Saved %s corpus: %d episodes, %d frames -> %s",
    ds.provenance,
    len(ds.episodes),
    ds.num_frames,
    path,
  )


def _require(
  manifest: dict[str, Any], key: str, kind: type, prefix: str | None = None
) -> Any:
  field = key if prefix is None else f"{prefix}.{key}"
  if key not in manifest:
    raise DataFormatError("missing field", field=field)
  value = manifest[key]
  if not isinstance(value, kind):
    raise DataFormatError(f"expected {kind.__name__}", field=field)
  return value


def _read_blob(
  path: Path, field: str, dtype: str, shape: tuple[int, ...]
) -> npt.NDArray[Any]:
  if not path.is_file():
    raise DataFormatError(f"missing payload {path.name}", field=field)
  data = np.fromfile(path, dtype=dtype)
  if data.size != int(np.prod(shape)):
    msg = f"payload {path.name} holds {data.size} values, expected {shape}"
    raise DataFormatError(msg, field=field)
  return data.reshape(shape)


def load_dataset(path: Path) -> TrajectoryDataset:
  """Read a corpus written by `save_dataset`.

  Raises:
      DataFormatError: If the manifest or any payload is malformed; the
          error names the offending field (e.g. "episodes[2]").
  """
  manifest_path = path / MANIFEST_NAME
  if not manifest_path.is_file():
    raise DataFormatError(f"no manifest in {path}", field="manifest")
  try:
    manifest = tomlkit.parse(manifest_path.read_text()).unwrap()
  except TOMLKitError as e:
    raise DataFormatError(str(e), field="manifest") from None

  fmt = _require(manifest, "format", str)
  if fmt != FORMAT_VERSION:
    raise DataFormatError(f"unsupported format {fmt!r}", field="format")
  try:
    provenance = ProvenanceTag(_require(manifest, "provenance", str))
  except ValueError:
    raise DataFormatError("unknown provenance", field="provenance") from None
  height = _require(manifest, "height", int)
  width = _require(manifest, "width", int)
  seq_len = _require(manifest, "seq_len", int)
  capacity = _require(manifest, "capacity", int)
  num_episodes = _require(manifest, "num_episodes", int)
  entries: list[dict[str, Any]] = manifest.get("episodes", [])

  ds = TrajectoryDataset(provenance, capacity=capacity, seq_len=seq_len)
  for index in range(num_episodes):
    field = f"episodes[{index}]"
    if index >= len(entries):
      raise DataFormatError(
        f"manifest claims {num_episodes} episodes, found {len(entries)}",
        field=field,
      )
    entry = entries[index]
    length = _require(entry, "length", int, field)
    episode_len = _require(entry, "episode_len", int, field)
    frames = _read_blob(
      path / _blob_name(index, "pixels"),
      field,
      "u1",
      (length, height, width, 3),
    )
    states = None
    if "state_dim" in entry:
      states = _read_blob(
        path / _blob_name(index, "states"),
        f"{field}.states",
        "<f4",
        (length, _require(entry, "state_dim", int, field)),
      ).astype(np.float32)
    actions = None
    if "action_dim" in entry:
      actions = _read_blob(
        path / _blob_name(index, "actions"),
        f"{field}.actions",
        "<f4",
        (length - 1, _require(entry, "action_dim", int, field)),
      ).astype(np.float32)
    try:
      ds.add_episode(Episode(frames, episode_len, states, actions))
    except ValueError as e:
      raise DataFormatError(str(e), field=field) from None

  num_frames = manifest.get("num_frames")
  if num_frames is not None and num_frames != ds.num_frames:
    raise DataFormatError(
      f"manifest claims {num_frames} frames, payloads hold {ds.num_frames}",
      field="num_frames",
    )
  return ds
