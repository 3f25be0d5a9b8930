"""Tests for the core data records."""

import numpy as np
import pytest
from diffil.data.types import (
  DomainTag,
  Frame,
  FrameBatch,
  FrameSequence,
  ProvenanceTag,
  Transition,
  pad_sequence,
  sequence_indices,
)
from hamcrest import assert_that, contains_exactly, equal_to, has_length


def _frames(count: int, provenance: ProvenanceTag = ProvenanceTag.SOURCE_EXPERT):
  return [
    Frame(
      pixels=np.full((4, 4, 3), t, dtype=np.uint8),
      t=t,
      episode_len=count - 1,
      provenance=provenance,
    )
    for t in range(count)
  ]


class TestTags:
  """Domain and provenance tags."""

  def test_provenance_domains(self) -> None:
    """Test each provenance belongs to the right domain."""
    assert ProvenanceTag.SOURCE_EXPERT.domain is DomainTag.SOURCE
    assert ProvenanceTag.SOURCE_RANDOM.domain is DomainTag.SOURCE
    assert ProvenanceTag.TARGET_RANDOM.domain is DomainTag.TARGET
    assert ProvenanceTag.TARGET_LEARNER.domain is DomainTag.TARGET

  def test_only_source_expert_is_expert(self) -> None:
    """Test expertise is unique to source-expert frames."""
    experts = [tag for tag in ProvenanceTag if tag.is_expert]

    assert_that(experts, contains_exactly(ProvenanceTag.SOURCE_EXPERT))

  def test_opposite_domain(self) -> None:
    """Test the opposite of each domain."""
    assert DomainTag.SOURCE.opposite is DomainTag.TARGET
    assert DomainTag.TARGET.opposite is DomainTag.SOURCE


class TestFrame:
  """Frame validation."""

  def test_rejects_non_uint8(self) -> None:
    """Test pixels must be uint8."""
    with pytest.raises(ValueError):
      Frame(np.zeros((4, 4, 3)), 0, 5, ProvenanceTag.SOURCE_RANDOM)

  def test_rejects_wrong_channel_count(self) -> None:
    """Test pixels must have three channels."""
    with pytest.raises(ValueError):
      Frame(np.zeros((4, 4, 1), np.uint8), 0, 5, ProvenanceTag.SOURCE_RANDOM)

  def test_rejects_t_beyond_episode(self) -> None:
    """Test t must lie within [0, H]."""
    with pytest.raises(ValueError):
      Frame(np.zeros((4, 4, 3), np.uint8), 6, 5, ProvenanceTag.SOURCE_RANDOM)

  def test_t_equal_to_episode_len_allowed(self) -> None:
    """Test the final observation at t = H is a valid frame."""
    frame = Frame(np.zeros((4, 4, 3), np.uint8), 5, 5, ProvenanceTag.SOURCE_EXPERT)

    assert frame.domain is DomainTag.SOURCE


class TestPadSequence:
  """Observation sequences with left padding."""

  def test_indices_pad_with_frame_zero(self) -> None:
    """Test the window before the episode start repeats frame 0."""
    assert_that(sequence_indices(2, 4).tolist(), equal_to([0, 0, 1, 2]))
    assert_that(sequence_indices(0, 4).tolist(), equal_to([0, 0, 0, 0]))
    assert_that(sequence_indices(5, 4).tolist(), equal_to([2, 3, 4, 5]))

  def test_pad_at_t2(self) -> None:
    """Test t=2 with L=4 yields frames [0, 0, 1, 2]."""
    seq = pad_sequence(_frames(10), 2, 4)

    assert_that([frame.t for frame in seq.frames], equal_to([0, 0, 1, 2]))
    assert seq.t == 2
    assert seq.seq_len == 4

  def test_pad_in_middle(self) -> None:
    """Test a window fully inside the episode is not padded."""
    seq = pad_sequence(_frames(10), 7, 3)

    assert_that([frame.t for frame in seq.frames], equal_to([5, 6, 7]))

  def test_pixels_stack_in_time_order(self) -> None:
    """Test pixels() stacks [L, H, W, 3] oldest first."""
    pixels = pad_sequence(_frames(10), 1, 3).pixels()

    assert pixels.shape == (3, 4, 4, 3)
    assert_that(pixels[:, 0, 0, 0].tolist(), equal_to([0, 0, 1]))

  def test_t_out_of_range(self) -> None:
    """Test t beyond the episode raises IndexError."""
    with pytest.raises(IndexError):
      pad_sequence(_frames(5), 5, 4)
    with pytest.raises(IndexError):
      pad_sequence(_frames(5), -1, 4)

  def test_seq_len_must_be_positive(self) -> None:
    """Test L >= 1."""
    with pytest.raises(ValueError):
      pad_sequence(_frames(5), 2, 0)

  def test_sequence_rejects_gaps(self) -> None:
    """Test frames of a sequence must be consecutive."""
    frames = _frames(6)
    with pytest.raises(ValueError):
      FrameSequence((frames[1], frames[3]))

  def test_sequence_rejects_mixed_provenance(self) -> None:
    """Test frames of a sequence share provenance."""
    expert = _frames(3)
    random = _frames(3, ProvenanceTag.SOURCE_RANDOM)
    with pytest.raises(ValueError):
      FrameSequence((expert[0], random[1]))


class TestTransition:
  """Learner transition validation."""

  def _seq(self, provenance: ProvenanceTag) -> FrameSequence:
    return pad_sequence(_frames(4, provenance), 1, 2)

  def test_requires_learner_frames(self) -> None:
    """Test transitions carry target-learner observations."""
    with pytest.raises(ValueError):
      Transition(
        np.zeros(1, np.float32),
        np.zeros(1, np.float32),
        np.zeros(1, np.float32),
        self._seq(ProvenanceTag.TARGET_RANDOM),
      )

  def test_rejects_out_of_bounds_action(self) -> None:
    """Test stored actions lie in [-1, 1]."""
    with pytest.raises(ValueError):
      Transition(
        np.zeros(1, np.float32),
        np.full(1, 1.5, np.float32),
        np.zeros(1, np.float32),
        self._seq(ProvenanceTag.TARGET_LEARNER),
      )

  def test_rejects_non_finite_state(self) -> None:
    """Test states must be finite."""
    with pytest.raises(ValueError):
      Transition(
        np.array([np.nan], np.float32),
        np.zeros(1, np.float32),
        np.zeros(1, np.float32),
        self._seq(ProvenanceTag.TARGET_LEARNER),
      )


class TestFrameBatch:
  """Column batches of sequences."""

  def test_concat_keeps_provenance_per_sample(self) -> None:
    """Test concatenated batches keep each sample's provenance."""

    def batch(n: int, provenance: ProvenanceTag) -> FrameBatch:
      return FrameBatch(
        seq_pixels=np.zeros((n, 2, 4, 4, 3), np.uint8),
        t=np.arange(n),
        episode_len=np.full(n, 9),
        provenance=[provenance] * n,
      )

    merged = FrameBatch.concat(
      [batch(2, ProvenanceTag.SOURCE_EXPERT), batch(3, ProvenanceTag.SOURCE_RANDOM)]
    )

    assert_that(merged, has_length(5))
    assert_that(merged.is_expert.tolist(), equal_to([True, True, False, False, False]))
    assert merged.frame_pixels.shape == (5, 4, 4, 3)
    assert set(merged.domains) == {DomainTag.SOURCE}
