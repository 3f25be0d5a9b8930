"""Root test configuration: opt-in toy acceptance runs."""

import pytest

RUN_E2E = "--run-e2e"


def pytest_addoption(parser: pytest.Parser) -> None:
  parser.addoption(
    RUN_E2E,
    action="store_true",
    default=False,
    help="train the full toy profile and check acceptance thresholds",
  )


def pytest_collection_modifyitems(
  config: pytest.Config,
  items: list[pytest.Item],
) -> None:
  """Skip `e2e` tests unless --run-e2e is passed; they train for minutes."""
  if config.getoption(RUN_E2E):
    return
  skip_e2e = pytest.mark.skip(reason=f"toy acceptance run; pass {RUN_E2E}")
  for item in items:
    if "e2e" in item.keywords:
      item.add_marker(skip_e2e)
