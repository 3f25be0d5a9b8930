"""Environment lookup by name."""

from diffil.data.types import DomainTag
from diffil.envs.base import PixelEnv
from diffil.envs.dotworld import DotWorld
from diffil.envs.poleworld import PoleWorld
from diffil.errors import ConfigError

ENVIRONMENTS: dict[str, type[PixelEnv]] = {
  DotWorld.name: DotWorld,
  PoleWorld.name: PoleWorld,
}


def make_env(
  name: str, domain: DomainTag, episode_len: int, image_size: int
) -> PixelEnv:
  """Instantiate environment `name` in `domain`.

  Raises:
      ConfigError: If no environment has that name.
  """
  try:
    env_cls = ENVIRONMENTS[name]
  except KeyError:
    msg = f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}"
    raise ConfigError(msg) from None
  return env_cls(domain, episode_len, image_size)  # type: ignore[call-arg]
