"""Tests for offline corpus generation and loading."""

from pathlib import Path

import numpy as np
import pytest
from diffil.config import ExperimentConfig
from diffil.data.dataset import load_dataset, save_dataset
from diffil.data.types import DomainTag, ProvenanceTag
from diffil.envs import Corpora, generate_corpora, load_corpora, save_corpora
from diffil.envs.corpora import generate_corpus
from diffil.errors import ConfigError, DataFormatError
from diffil.labeling import time_labels
from diffil_testing.fixtures import TINY_EPISODE_LEN, tiny_config
from hamcrest import assert_that, equal_to, has_length


class TestGeneration:
  """Sizes, labels and determinism."""

  def test_sizes_exact(self, corpora: Corpora) -> None:
    """Test each corpus holds exactly its configured number of frames."""
    for ds in corpora.items().values():
      assert ds.num_frames == 40
      assert ds.remaining == 0

  def test_last_episode_truncated(self, corpora: Corpora) -> None:
    """Test full episodes hold H + 1 frames and the last is cut to fit."""
    lengths = [len(e) for e in corpora.source_expert.episodes]

    assert_that(lengths, equal_to([11, 11, 11, 7]))

  def test_provenance_and_domains(self, corpora: Corpora) -> None:
    """Test corpora carry their provenance and split by domain."""
    assert corpora.source_expert.provenance is ProvenanceTag.SOURCE_EXPERT
    assert_that(corpora.domain(DomainTag.SOURCE), has_length(2))
    assert corpora.domain(DomainTag.TARGET) == [corpora.target_random]

  def test_expert_time_labels_at_least_half(self, corpora: Corpora) -> None:
    """Test every source-expert frame gets a time label in [0.5, 1]."""
    ds = corpora.source_expert
    t = ds.timesteps()

    labels = time_labels(t, np.full(len(t), TINY_EPISODE_LEN), np.ones(len(t), bool))

    assert labels.min() >= 0.5
    assert labels.max() <= 1.0

  def test_expert_moves_forward(self, corpora: Corpora) -> None:
    """Test expert states increase along each episode."""
    for episode in corpora.source_expert.episodes:
      assert episode.states is not None
      assert np.all(np.diff(episode.states[:, 0]) >= 0)

  def test_same_seed_identical(self, corpora: Corpora) -> None:
    """Test equal seeds give bit-identical corpora."""
    again = generate_corpora(tiny_config())

    for tag, ds in corpora.items().items():
      assert ds.equals(again.items()[tag])

  def test_different_seed_differs(self, corpora: Corpora) -> None:
    """Test another seed changes the random corpora."""
    other = generate_corpora(tiny_config(), seed=1)

    assert not corpora.source_random.equals(other.source_random)

  def test_random_frames_not_expert(
    self, config: ExperimentConfig, rng: np.random.Generator
  ) -> None:
    """Test random corpora are tagged non-expert."""
    ds = generate_corpus(config, ProvenanceTag.TARGET_RANDOM, rng)

    assert not ds.sample(rng, 8).is_expert.any()
    assert ds.image_shape == (8, 8)


class TestPersistence:
  """Save, load and compatibility checks."""

  def test_round_trip(self, corpora: Corpora, tmp_path: Path) -> None:
    """Test saved corpora load back identical."""
    save_corpora(corpora, tmp_path)

    loaded = load_corpora(tmp_path, tiny_config())

    for tag, ds in corpora.items().items():
      assert loaded.items()[tag].equals(ds)

  def test_missing_corpus(self, corpora: Corpora, tmp_path: Path) -> None:
    """Test a directory without one of the corpora is a data error."""
    save_dataset(corpora.source_expert, tmp_path / "source_expert")

    with pytest.raises(DataFormatError):
      load_corpora(tmp_path)

  def test_wrong_image_size(self, corpora: Corpora, tmp_path: Path) -> None:
    """Test corpora rendered at another size do not fit the config."""
    save_corpora(corpora, tmp_path)
    config = tiny_config(network={"image_size": 16})

    with pytest.raises(ConfigError):
      load_corpora(tmp_path, config)

  def test_wrong_seq_len(self, corpora: Corpora, tmp_path: Path) -> None:
    """Test corpora built for another L do not fit the config."""
    save_corpora(corpora, tmp_path)

    with pytest.raises(ConfigError):
      load_corpora(tmp_path, tiny_config(network={"seq_len": 3}))

  def test_swapped_corpora(self, corpora: Corpora, tmp_path: Path) -> None:
    """Test a corpus stored under another provenance's name is refused."""
    save_corpora(corpora, tmp_path)
    save_dataset(corpora.source_random, tmp_path / "source_expert")

    with pytest.raises(ConfigError):
      load_corpora(tmp_path)

  def test_loaded_corpus_keeps_states(self, corpora: Corpora, tmp_path: Path) -> None:
    """Test states survive so mapping errors can be scored."""
    save_dataset(corpora.target_random, tmp_path / "tr")

    loaded = load_dataset(tmp_path / "tr")

    states = loaded.all_states()
    assert states is not None
    assert len(states) == 40
