"""End-to-end imitation, invariance and mapping on DotWorld."""

import numpy as np
import pytest
from diffil.analysis import domain_probe, encode_frames, map_features, probe_frames
from diffil.envs import DotWorld
from diffil_testing.fixtures.runs import ToyRun
from hamcrest import assert_that, greater_than, greater_than_or_equal_to

pytestmark = [pytest.mark.e2e, pytest.mark.timeout(4 * 3600)]

TARGET_ORACLE_RETURN = 1.5
PROBE_PER_DOMAIN = 1000


def _mean_final_return(runs: list[ToyRun]) -> float:
  return float(np.mean([run.final_returns.mean() for run in runs]))


def test_learner_reaches_expert_level(full_runs: list[ToyRun]) -> None:
  """Test the learner earns >= 80% of the target oracle return over 3 seeds."""
  assert_that(
    _mean_final_return(full_runs),
    greater_than_or_equal_to(0.8 * TARGET_ORACLE_RETURN),
  )


def test_sequence_mapping_only_is_worse(
  full_runs: list[ToyRun], ablated_runs: list[ToyRun]
) -> None:
  """Test dropping frame-level alignment and labels lowers the final return."""
  full = _mean_final_return(full_runs)

  assert_that(full, greater_than(_mean_final_return(ablated_runs)))


@pytest.mark.parametrize("seed_index", [0, 1, 2])
def test_features_hide_the_domain(full_runs: list[ToyRun], seed_index: int) -> None:
  """Test a feature probe is near chance while a pixel probe is near perfect."""
  run = full_runs[seed_index]
  frames, labels = probe_frames(
    run.corpora, PROBE_PER_DOMAIN, np.random.default_rng(run.config.seed)
  )
  features = encode_frames(run.model.perception.encoder, frames)
  pixels = frames.reshape(len(frames), -1) / 255.0

  on_features = domain_probe(features, labels, seed=run.config.seed)
  on_pixels = domain_probe(pixels, labels, seed=run.config.seed)

  assert on_features.accuracy <= 0.65
  assert on_pixels.accuracy >= 0.95


@pytest.mark.parametrize("seed_index", [0, 1, 2])
def test_learner_frames_map_to_matching_positions(
  full_runs: list[ToyRun], seed_index: int
) -> None:
  """Test >= 80% of learner frames map within 0.1 of their true position."""
  run = full_runs[seed_index]
  buffer = run.trainer.buffer
  batch = buffer.batch(np.arange(len(buffer), dtype=np.int64))
  expert = run.corpora.source_expert
  expert_states = expert.all_states()
  assert expert_states is not None

  report = map_features(
    run.model.perception.encoder,
    batch.obs_seq[:, -1],
    expert.all_frames(),
    query_positions=batch.next_states[:, 0].astype(np.float64),
    reference_positions=expert_states[:, 0].astype(np.float64),
    position_error=DotWorld.position_error,
  )

  fraction = report.fraction_within(0.1)
  assert fraction is not None
  assert fraction >= 0.8
