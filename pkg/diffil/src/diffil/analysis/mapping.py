"""Cross-domain image mapping by nearest neighbour in feature space.

Each query frame is matched to the reference frame (normally a
source-expert frame) with the closest encoder feature. In the toy
environments the frames' task coordinates give a ground-truth error for
every match.
"""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import pandas as pd
import torch

from diffil.analysis.features import encode_frames
from diffil.networks import Net

PositionError = Callable[[float, float], float]

NEIGHBOR_CHUNK = 1024


@dataclass(frozen=True)
class MappingReport:
  """Per-query nearest reference frame.

  Attributes:
      indices: Index of the matched reference frame, int64 [N].
      distances: Euclidean feature distance to the match, float64 [N].
      position_errors: Ground-truth task-coordinate error of each match, or
          None when positions are unknown.
  """

  indices: npt.NDArray[np.int64]
  distances: npt.NDArray[np.float64]
  position_errors: npt.NDArray[np.float64] | None = None

  def __len__(self) -> int:
    return len(self.indices)

  @property
  def median_error(self) -> float | None:
    if self.position_errors is None:
      return None
    return float(np.median(self.position_errors))

  def fraction_within(self, threshold: float) -> float | None:
    """Share of queries whose match lies within `threshold` position error."""
    if self.position_errors is None:
      return None
    return float(np.mean(self.position_errors <= threshold))

  def to_frame(self) -> pd.DataFrame:
    columns: dict[str, npt.NDArray[np.generic]] = {
      "query": np.arange(len(self), dtype=np.int64),
      "reference": self.indices,
      "distance": self.distances,
    }
    if self.position_errors is not None:
      columns["position_error"] = self.position_errors
    return pd.DataFrame(columns)


@torch.no_grad()
def nearest_neighbors(
  query: npt.NDArray[np.float64],
  reference: npt.NDArray[np.float64],
  *,
  self_match: bool = False,
  chunk: int = NEIGHBOR_CHUNK,
) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.float64]]:
  """Index and distance of each query row's nearest reference row.

  Args:
      query: Features [N, F].
      reference: Features [M, F].
      self_match: Query and reference are the same set; ties at the minimum
          distance resolve to the query's own row.
      chunk: Query rows per distance block.

  Returns:
      (indices [N], distances [N]); ties otherwise go to the lowest index.
  """
  if reference.ndim != 2 or len(reference) == 0:
    raise ValueError("reference features must be a non-empty [M, F] array")
  if query.ndim != 2 or query.shape[1] != reference.shape[1]:
    msg = f"query features {query.shape} do not match reference {reference.shape}"
    raise ValueError(msg)
  if self_match and query.shape != reference.shape:
    raise ValueError("self_match needs query and reference of equal shape")
  ref = torch.as_tensor(reference, dtype=torch.float64)
  indices: list[npt.NDArray[np.int64]] = []
  distances: list[npt.NDArray[np.float64]] = []
  for start in range(0, len(query), chunk):
    block = torch.as_tensor(query[start : start + chunk], dtype=torch.float64)
    # Exact differences; the matmul shortcut leaves nonzero self-distances
    dist = torch.cdist(block, ref, compute_mode="donot_use_mm_for_euclid_dist")
    best, index = dist.min(dim=1)
    if self_match:
      rows = torch.arange(len(block))
      own = rows + start
      own_dist = dist[rows, own]
      keep_own = own_dist <= best
      index = torch.where(keep_own, own, index)
      best = torch.where(keep_own, own_dist, best)
    indices.append(index.numpy().astype(np.int64))
    distances.append(best.numpy())
  return np.concatenate(indices), np.concatenate(distances)


def map_features(
  encoder: Net,
  query_frames: npt.NDArray[np.uint8],
  reference_frames: npt.NDArray[np.uint8],
  *,
  query_positions: npt.NDArray[np.float64] | None = None,
  reference_positions: npt.NDArray[np.float64] | None = None,
  position_error: PositionError | None = None,
  self_match: bool = False,
) -> MappingReport:
  """Match every query frame to its nearest reference frame.

  Position errors are reported when both position arrays and an error
  metric are given.
  """
  query = encode_frames(encoder, query_frames)
  reference = query if self_match else encode_frames(encoder, reference_frames)
  indices, distances = nearest_neighbors(query, reference, self_match=self_match)
  errors = None
  if (
    query_positions is not None
    and reference_positions is not None
    and position_error is not None
  ):
    if len(query_positions) != len(query_frames):
      raise ValueError("query_positions must parallel query_frames")
    if len(reference_positions) != len(reference_frames):
      raise ValueError("reference_positions must parallel reference_frames")
    errors = np.array(
      [
        position_error(float(query_positions[i]), float(reference_positions[j]))
        for i, j in enumerate(indices)
      ],
      dtype=np.float64,
    )
  return MappingReport(indices, distances, errors)
