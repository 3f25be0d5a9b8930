"""Domain-confusion probe.

A fresh classifier learns to tell source from target frames, either from
frozen encoder features or from raw pixels, and is scored on a held-out
split. Accuracy near 0.5 means the features carry no domain information.
"""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import train_test_split
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from diffil.data.types import DomainTag
from diffil.envs.corpora import Corpora
from diffil.errors import DataFormatError
from diffil.logging import get_logger

logger = get_logger("analysis.probe")

MIN_PER_DOMAIN = 10
TEST_FRACTION = 0.3


@dataclass(frozen=True)
class ProbeResult:
  accuracy: float
  n_train: int
  n_test: int
  shuffled: bool = False


def probe_frames(
  corpora: Corpora, per_domain: int, rng: np.random.Generator
) -> tuple[npt.NDArray[np.uint8], npt.NDArray[np.int64]]:
  """A balanced sample of frames with domain labels (1 = source).

  Each domain contributes min(per_domain, its frame count) frames, drawn
  without replacement from the union of its corpora.
  """
  frames: list[npt.NDArray[np.uint8]] = []
  labels: list[npt.NDArray[np.int64]] = []
  counts = {
    domain: sum(ds.num_frames for ds in corpora.domain(domain))
    for domain in DomainTag
  }
  count = min(per_domain, *counts.values())
  for domain in DomainTag:
    pool = [ds.all_frames() for ds in corpora.domain(domain) if ds.num_frames]
    if not pool:
      continue
    union = np.concatenate(pool)
    chosen = rng.choice(len(union), size=count, replace=False)
    frames.append(union[np.sort(chosen)])
    labels.append(np.full(count, int(domain is DomainTag.SOURCE), dtype=np.int64))
  if not frames:
    raise DataFormatError("no frames to probe", field="corpora")
  return np.concatenate(frames), np.concatenate(labels)


def domain_probe(
  features: npt.NDArray[np.floating],
  labels: npt.NDArray[np.int64],
  *,
  seed: int = 0,
  test_fraction: float = TEST_FRACTION,
  shuffle_labels: bool = False,
) -> ProbeResult:
  """Held-out accuracy of a logistic-regression domain classifier.

  Args:
      features: Inputs [N, D]; raw pixels should be flattened first.
      labels: Domain label per row.
      seed: Seed of the split, the label shuffle and the classifier.
      test_fraction: Share of rows held out, stratified by domain.
      shuffle_labels: Permute labels before the split (chance baseline).

  Raises:
      DataFormatError: If either domain has fewer than MIN_PER_DOMAIN rows.
  """
  if len(features) != len(labels):
    raise ValueError("features and labels differ in length")
  for value in (0, 1):
    have = int(np.sum(labels == value))
    if have < MIN_PER_DOMAIN:
      msg = f"need at least {MIN_PER_DOMAIN} frames per domain for a held-out "
      msg += f"split, got {have}"
      raise DataFormatError(msg, field="corpora")
  rng = np.random.default_rng(seed)
  if shuffle_labels:
    labels = rng.permutation(labels)
  x = features.reshape(len(features), -1).astype(np.float64)
  x_train, x_test, y_train, y_test = train_test_split(
    x, labels, test_size=test_fraction, random_state=seed, stratify=labels
  )
  classifier = make_pipeline(
    StandardScaler(), LogisticRegression(max_iter=2000, random_state=seed)
  )
  classifier.fit(x_train, y_train)
  accuracy = float(classifier.score(x_test, y_test))
  logger.debug(
    "Domain probe: accuracy %.3f on %d held-out rows", accuracy, len(y_test)
  )
  return ProbeResult(accuracy, len(y_train), len(y_test), shuffle_labels)
