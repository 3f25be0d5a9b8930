"""Toy-profile runs shared by the acceptance tests.

Each fixture trains full-size DotWorld runs for three seeds, which takes
tens of minutes on a laptop CPU; they are only built when an e2e test is
selected (`--run-e2e`).
"""

import pytest
from diffil_testing.fixtures.runs import ToyRun, train_toy_run

SEEDS = (0, 1, 2)


@pytest.fixture(scope="session")
def full_runs(tmp_path_factory: pytest.TempPathFactory) -> list[ToyRun]:
  root = tmp_path_factory.mktemp("toy")
  return [train_toy_run(root, seed) for seed in SEEDS]


@pytest.fixture(scope="session")
def ablated_runs(tmp_path_factory: pytest.TempPathFactory) -> list[ToyRun]:
  root = tmp_path_factory.mktemp("toy-ablation")
  return [train_toy_run(root, seed, "seq-mapping-only") for seed in SEEDS]
