"""Tests for the FIFO learner buffer."""

import numpy as np
import pytest
from diffil.data.buffer import LearnerBuffer, buffer_refresh
from diffil.data.types import ProvenanceTag
from diffil_testing.fixtures import make_transition
from hamcrest import assert_that, equal_to, has_length


def _tags(buffer: LearnerBuffer) -> list[int]:
  return [int(t.state[0]) for t in buffer.transitions()]


class TestLearnerBuffer:
  """Insertion, eviction and sampling."""

  def test_capacity_must_be_positive(self) -> None:
    """Test a zero-capacity buffer is refused."""
    with pytest.raises(ValueError):
      LearnerBuffer(0)

  def test_add_until_full(self) -> None:
    """Test inserting up to capacity evicts nothing."""
    buffer = LearnerBuffer(3)

    evicted = [buffer.add(make_transition(i)) for i in range(3)]

    assert evicted == [False, False, False]
    assert buffer.is_full
    assert_that(_tags(buffer), equal_to([0, 1, 2]))

  def test_refresh_evicts_oldest(self) -> None:
    """Test a full buffer drops its oldest transitions first."""
    buffer = LearnerBuffer(4)
    buffer.refresh([make_transition(i) for i in range(4)])

    evicted = buffer.refresh([make_transition(i) for i in range(4, 7)])

    assert evicted == 3
    assert_that(_tags(buffer), equal_to([3, 4, 5, 6]))
    assert buffer.total_inserted == 7

  def test_refresh_larger_than_capacity_rejected(self) -> None:
    """Test a refresh block may not exceed the capacity."""
    with pytest.raises(ValueError):
      LearnerBuffer(2).refresh([make_transition(i) for i in range(3)])

  def test_get_out_of_range(self) -> None:
    """Test reading past the end raises IndexError."""
    buffer = buffer_refresh(LearnerBuffer(2), [make_transition(0)])

    with pytest.raises(IndexError):
      buffer.get(1)

  def test_sample_empty_rejected(self, rng: np.random.Generator) -> None:
    """Test sampling needs at least one transition."""
    with pytest.raises(ValueError):
      LearnerBuffer(2).sample(rng, 4)

  def test_batch_columns(self) -> None:
    """Test gathered batches keep states, actions and pixels aligned."""
    buffer = buffer_refresh(LearnerBuffer(5), [make_transition(i) for i in range(5)])

    batch = buffer.batch(np.array([4, 0]))

    assert_that(batch, has_length(2))
    assert batch.states[:, 0].tolist() == [4.0, 0.0]
    assert batch.next_states[:, 0].tolist() == [4.5, 0.5]
    assert batch.obs_seq.shape == (2, 2, 4, 4, 3)
    assert batch.obs_seq[0, -1, 0, 0, 0] == 4

  def test_frame_batch_for_model_training(self) -> None:
    """Test learner sequences come out as target-learner frame batches."""
    buffer = buffer_refresh(
      LearnerBuffer(3), [make_transition(i, t=i + 1) for i in range(3)]
    )

    batch = buffer.frame_batch(np.array([0, 2]))

    assert batch.t.tolist() == [1, 3]
    assert set(batch.provenance) == {ProvenanceTag.TARGET_LEARNER}
    assert not batch.is_expert.any()

  def test_state_dict_round_trip(self) -> None:
    """Test a restored buffer holds the same transitions in the same order."""
    buffer = LearnerBuffer(3)
    buffer.refresh([make_transition(i) for i in range(5)])

    restored = LearnerBuffer(1)
    restored.load_state_dict(buffer.state_dict())

    assert restored.capacity == 3
    assert restored.total_inserted == 5
    assert_that(_tags(restored), equal_to([2, 3, 4]))
    restored.add(make_transition(9))
    assert_that(_tags(restored), equal_to([3, 4, 9]))


class TestFifoProperty:
  """FIFO semantics over random insertion traces."""

  @pytest.mark.parametrize("seed", range(8))
  def test_content_is_last_capacity_inserted(self, seed: int) -> None:
    """Test the buffer always holds the newest min(n, capacity) transitions."""
    rng = np.random.default_rng(seed)
    capacity = int(rng.integers(1, 40))
    buffer = LearnerBuffer(capacity)
    inserted: list[int] = []
    for _ in range(int(rng.integers(1, 12))):
      block = int(rng.integers(1, capacity + 1))
      new = list(range(len(inserted), len(inserted) + block))
      expected_evictions = max(0, len(buffer) + block - capacity)

      evicted = buffer.refresh([make_transition(tag) for tag in new])

      inserted += new
      assert evicted == expected_evictions
      assert len(buffer) == min(len(inserted), capacity)
      assert _tags(buffer) == inserted[-capacity:]

  def test_full_after_enough_refreshes(self) -> None:
    """Test 50 refreshes of 1000 exactly fill a 50,000-transition buffer."""
    buffer = LearnerBuffer(50_000)
    block = [make_transition(i, image_size=1, seq_len=1) for i in range(1000)]

    for _ in range(50):
      buffer.refresh(block)

    assert buffer.is_full
    assert len(buffer) == 50_000
    assert buffer.refresh(block) == 1000
    assert len(buffer) == 50_000
