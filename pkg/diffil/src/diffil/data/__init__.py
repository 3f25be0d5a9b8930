"""Data model for DIFF-IL.

Records shared by all modules, the four corpora (three offline trajectory
datasets and the online learner buffer) and the on-disk corpus container.
"""

from diffil.data.buffer import LearnerBuffer, buffer_refresh
from diffil.data.dataset import (
  Episode,
  TrajectoryDataset,
  load_dataset,
  save_dataset,
)
from diffil.data.types import (
  DEFAULT_SEQ_LEN,
  DomainTag,
  Frame,
  FrameBatch,
  FrameSequence,
  ProvenanceTag,
  Transition,
  TransitionBatch,
  pad_sequence,
  sequence_indices,
)

__all__ = [
  "DEFAULT_SEQ_LEN",
  "DomainTag",
  "Episode",
  "Frame",
  "FrameBatch",
  "FrameSequence",
  "LearnerBuffer",
  "ProvenanceTag",
  "TrajectoryDataset",
  "Transition",
  "TransitionBatch",
  "buffer_refresh",
  "load_dataset",
  "pad_sequence",
  "save_dataset",
  "sequence_indices",
]
