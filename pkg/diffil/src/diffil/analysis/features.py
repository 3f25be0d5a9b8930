"""Frozen encoder features of corpus frames."""

from pathlib import Path

import numpy as np
import numpy.typing as npt
import torch

from diffil.envs.corpora import Corpora
from diffil.errors import DataFormatError
from diffil.logging import get_logger
from diffil.networks import Net, pixels_to_tensor

logger = get_logger("analysis.features")

ENCODE_CHUNK = 512


@torch.no_grad()
def encode_frames(
  encoder: Net, frames: npt.NDArray[np.uint8], chunk: int = ENCODE_CHUNK
) -> npt.NDArray[np.float64]:
  """Features [N, F] of uint8 frames [N, H, W, 3], encoded in chunks."""
  if len(frames) == 0:
    raise ValueError("no frames to encode")
  parts = [
    encoder(pixels_to_tensor(frames[start : start + chunk])).double().numpy()
    for start in range(0, len(frames), chunk)
  ]
  return np.concatenate(parts)


def export_features(encoder: Net, corpora: Corpora, path: Path) -> int:
  """Write every corpus frame's features to a `.npz`.

  Arrays: `features` [N, F] float32, `domain` and `provenance` [N] strings,
  `t` [N] int64.

  Returns:
      Number of frames written.
  """
  features: list[npt.NDArray[np.float64]] = []
  domains: list[npt.NDArray[np.str_]] = []
  provenances: list[npt.NDArray[np.str_]] = []
  timesteps: list[npt.NDArray[np.int64]] = []
  for provenance, ds in corpora.items().items():
    if ds.num_frames == 0:
      continue
    features.append(encode_frames(encoder, ds.all_frames()))
    domains.append(np.full(ds.num_frames, provenance.domain.value))
    provenances.append(np.full(ds.num_frames, provenance.value))
    timesteps.append(ds.timesteps())
  if not features:
    raise DataFormatError("every corpus is empty", field="corpora")
  path.parent.mkdir(parents=True, exist_ok=True)
  np.savez(
    path,
    features=np.concatenate(features).astype(np.float32),
    domain=np.concatenate(domains),
    provenance=np.concatenate(provenances),
    t=np.concatenate(timesteps),
  )
  count = sum(len(f) for f in features)
  logger.info("Exported %d feature vectors to %s", count, path)
  return count
