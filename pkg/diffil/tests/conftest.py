"""Test configuration and shared fixtures for diffil tests."""

import numpy as np
import pytest
import torch
from diffil.config import ExperimentConfig
from diffil.envs.corpora import Corpora
from diffil_testing.fixtures import tiny_config, tiny_corpora


@pytest.fixture(autouse=True)
def _single_thread() -> None:
  torch.set_num_threads(1)


@pytest.fixture
def rng() -> np.random.Generator:
  return np.random.default_rng(0)


@pytest.fixture
def config() -> ExperimentConfig:
  return tiny_config()


@pytest.fixture(scope="session")
def corpora() -> Corpora:
  """Tiny DotWorld corpora, generated once; tests must not modify them."""
  return tiny_corpora()
