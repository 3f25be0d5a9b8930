"""Experiment configuration.

Every loss weight, schedule count and architecture knob lives in one
validated, frozen `ExperimentConfig`. Config files are TOML with a
`version` field; unknown keys are rejected at every level so a typo in a
hyperparameter name never passes silently.

Resolution order: profile defaults, then the config file, then CLI
overrides. The merged mapping is validated once, before anything runs.
"""

import math
from enum import StrEnum
from pathlib import Path
from typing import Any, Literal

import tomlkit
from pydantic import (
  BaseModel,
  ConfigDict,
  Field,
  NonNegativeFloat,
  PositiveInt,
  ValidationError,
  model_validator,
)
from tomlkit.exceptions import TOMLKitError

from diffil.errors import ConfigError

CONFIG_VERSION = 1


class Profile(StrEnum):
  TOY = "toy"
  PENDULUM = "pendulum"
  MUJOCO = "mujoco"


class Ablation(StrEnum):
  """Component variants used to evaluate the method's parts."""

  FULL = "full"
  NO_SEQ_WGAN = "no-seq-wgan"
  NO_FRAME_LABEL = "no-frame-label"
  SEQ_MAPPING_ONLY = "seq-mapping-only"


class _Section(BaseModel):
  model_config = ConfigDict(extra="forbid", frozen=True)


class LossWeights(_Section):
  lambda_recon: NonNegativeFloat = 1.0
  lambda_fcon: NonNegativeFloat = 1.0
  lambda_gp: NonNegativeFloat = 10.0
  # Balance between per-frame and sequence WGAN terms
  alpha: float = Field(default=0.5, gt=0.0, lt=1.0)
  lambda_disc: NonNegativeFloat = 1.0
  lambda_gen: NonNegativeFloat = 1.0
  lambda_label_seq_source: NonNegativeFloat = 10.0
  lambda_label_seq_target: NonNegativeFloat = 1e-3
  lambda_label_frame: NonNegativeFloat = 10.0
  reward_eps: float = Field(default=1e-12, gt=0.0, lt=1e-3)


class Schedule(_Section):
  n_iter: int = Field(default=200, ge=0)
  n_model_train: PositiveInt = 50
  n_rl_train: PositiveInt = 500
  # Generator/label updates happen on model steps k with k mod n == 0
  generator_period: PositiveInt = 5
  model_batch: PositiveInt = 64
  rl_batch: PositiveInt = 256
  refresh_count: PositiveInt = 500
  learner_prefill: PositiveInt = 500
  checkpoint_every: PositiveInt = 20
  eval_episodes: PositiveInt = 5


class NetworkConfig(_Section):
  image_size: PositiveInt = 32
  feature_dim: PositiveInt = 32
  seq_len: PositiveInt = 4
  encoder_filters: tuple[PositiveInt, ...] = (16, 16, 32, 32, 64, 64)
  encoder_strides: tuple[PositiveInt, ...] = (1, 2, 1, 2, 1, 2)
  decoder_filters: tuple[PositiveInt, ...] = (64, 64, 32, 32, 16, 16)
  decoder_strides: tuple[PositiveInt, ...] = (1, 2, 1, 2, 1, 2)
  kernel_size: PositiveInt = 3
  critic_hidden: tuple[PositiveInt, ...] = (400, 300)
  label_hidden: tuple[PositiveInt, ...] = (400, 300)
  actor_hidden: tuple[PositiveInt, ...] = (256, 256)
  leaky_slope: NonNegativeFloat = 0.2

  @model_validator(mode="after")
  def _check_geometry(self) -> "NetworkConfig":
    if len(self.encoder_filters) != len(self.encoder_strides):
      raise ValueError("encoder_filters and encoder_strides differ in length")
    if len(self.decoder_filters) != len(self.decoder_strides):
      raise ValueError("decoder_filters and decoder_strides differ in length")
    down = math.prod(self.encoder_strides)
    if self.image_size % down:
      msg = f"image_size {self.image_size} not divisible by stride product {down}"
      raise ValueError(msg)
    if math.prod(self.decoder_strides) != down:
      raise ValueError("decoder must upsample by the encoder's stride product")
    if any(s not in (1, 2) for s in (*self.encoder_strides, *self.decoder_strides)):
      raise ValueError("strides must be 1 or 2")
    return self


class SacConfig(_Section):
  gamma: float = Field(default=0.99, ge=0.0, le=1.0)
  tau: float = Field(default=0.005, gt=0.0, le=1.0)
  init_entropy_coef: float = Field(default=0.1, gt=0.0)
  # None means -A_dim
  target_entropy: float | None = None
  log_std_min: float = -20.0
  log_std_max: float = 2.0


class BufferSizes(_Section):
  source_expert: PositiveInt = 10_000
  source_random: PositiveInt = 10_000
  target_random: PositiveInt = 10_000
  learner: PositiveInt = 10_000


class EnvConfig(_Section):
  name: Literal["dotworld", "poleworld"] = "dotworld"
  episode_len: PositiveInt = 50
  random_episode_len: PositiveInt = 50


class ExperimentConfig(_Section):
  """All hyperparameters of one experiment.

  Attributes:
      version: Config schema version (must be 1).
      profile: Profile the defaults were taken from.
      seed: Seed of every random stream in the run.
      output_dir: Run directory; defaults to <DIFFIL_RUN_DIR>/<profile>-s<seed>.
      lr: Adam learning rate shared by all networks.
      ablation: Component variant (see `Ablation`).
  """

  version: Literal[1] = CONFIG_VERSION
  profile: Profile = Profile.TOY
  seed: int = 0
  output_dir: Path | None = None
  lr: float = Field(default=1e-3, gt=0.0)
  ablation: Ablation = Ablation.FULL
  losses: LossWeights = LossWeights()
  schedule: Schedule = Schedule()
  network: NetworkConfig = NetworkConfig()
  sac: SacConfig = SacConfig()
  buffers: BufferSizes = BufferSizes()
  env: EnvConfig = EnvConfig()

  @model_validator(mode="after")
  def _check_cross_section(self) -> "ExperimentConfig":
    if self.schedule.refresh_count > self.buffers.learner:
      raise ValueError("refresh_count exceeds the learner buffer capacity")
    if self.schedule.learner_prefill > self.buffers.learner:
      raise ValueError("learner_prefill exceeds the learner buffer capacity")
    if self.sac.log_std_min >= self.sac.log_std_max:
      raise ValueError("log_std_min must be below log_std_max")
    return self

  @property
  def effective_alpha(self) -> float:
    """alpha after the ablation: 1 drops sequence WGAN, 0 drops frame WGAN."""
    match self.ablation:
      case Ablation.NO_SEQ_WGAN:
        return 1.0
      case Ablation.SEQ_MAPPING_ONLY:
        return 0.0
      case _:
        return self.losses.alpha

  @property
  def frame_labels_enabled(self) -> bool:
    return self.ablation not in (Ablation.NO_FRAME_LABEL, Ablation.SEQ_MAPPING_ONLY)

  def run_dir(self, root: Path) -> Path:
    if self.output_dir is not None:
      return self.output_dir
    suffix = "" if self.ablation is Ablation.FULL else f"-{self.ablation}"
    return root / f"{self.profile}{suffix}-s{self.seed}"


# Table-driven profile defaults; anything not listed uses the field default.
_PROFILE_DEFAULTS: dict[Profile, dict[str, Any]] = {
  Profile.TOY: {},
  Profile.PENDULUM: {
    "losses": {"lambda_recon": 0.5, "lambda_disc": 50.0, "lambda_gen": 0.5},
    "schedule": {
      "n_iter": 300,
      "n_model_train": 100,
      "n_rl_train": 1000,
      "model_batch": 128,
      "refresh_count": 1000,
      "learner_prefill": 1000,
    },
    "buffers": {
      "source_expert": 50_000,
      "source_random": 50_000,
      "target_random": 50_000,
      "learner": 50_000,
    },
    "env": {"name": "poleworld", "episode_len": 200, "random_episode_len": 200},
  },
  Profile.MUJOCO: {
    "losses": {"lambda_recon": 1.0, "lambda_disc": 0.5, "lambda_gen": 1.0},
    "schedule": {
      "n_iter": 300,
      "n_model_train": 100,
      "n_rl_train": 1000,
      "model_batch": 64,
      "refresh_count": 1000,
      "learner_prefill": 1000,
    },
    "network": {"image_size": 64},
    "buffers": {
      "source_expert": 50_000,
      "source_random": 50_000,
      "target_random": 50_000,
      "learner": 50_000,
    },
    "env": {"name": "dotworld", "episode_len": 200, "random_episode_len": 200},
  },
}


def _deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
  merged = dict(base)
  for key, value in override.items():
    if isinstance(value, dict) and isinstance(merged.get(key), dict):
      merged[key] = _deep_merge(merged[key], value)  # type: ignore[arg-type]
    else:
      merged[key] = value
  return merged


def build_config(
  values: dict[str, Any] | None = None,
  overrides: dict[str, Any] | None = None,
) -> ExperimentConfig:
  """Validate profile defaults + file values + overrides.

  Args:
      values: Mapping read from a config file.
      overrides: CLI overrides (e.g. {"seed": 3}); None values are ignored.

  Returns:
      The validated configuration.

  Raises:
      ConfigError: If any value is invalid or a key is unknown.
  """
  values = dict(values or {})
  overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
  try:
    profile = Profile(overrides.get("profile", values.get("profile", Profile.TOY)))
  except ValueError as e:
    raise ConfigError(f"unknown profile: {e}") from None
  merged = _deep_merge(_PROFILE_DEFAULTS[profile], values)
  merged = _deep_merge(merged, overrides)
  merged["profile"] = profile
  try:
    return ExperimentConfig.model_validate(merged)
  except ValidationError as e:
    raise ConfigError(_format_validation_error(e)) from None


def _format_validation_error(error: ValidationError) -> str:
  lines = [
    f"{'.'.join(str(part) for part in item['loc'])}: {item['msg']}"
    for item in error.errors()
  ]
  return "invalid config: " + "; ".join(lines)


def default_config(
  profile: Profile = Profile.TOY, **overrides: Any
) -> ExperimentConfig:
  """Profile defaults with optional top-level overrides."""
  return build_config({"profile": profile}, overrides)


def parse_config(
  text: str, overrides: dict[str, Any] | None = None
) -> ExperimentConfig:
  """Parse TOML config text.

  Raises:
      ConfigError: On TOML syntax errors or invalid values.
  """
  try:
    values = tomlkit.parse(text).unwrap()
  except TOMLKitError as e:
    raise ConfigError(f"config is not valid TOML: {e}") from None
  if "version" not in values:
    raise ConfigError("config is missing the `version` field")
  return build_config(values, overrides)


def dump_config(config: ExperimentConfig) -> str:
  """Serialize a config to TOML text."""
  data = config.model_dump(mode="json", exclude_none=True)
  doc = tomlkit.document()
  doc.add(tomlkit.comment("DIFF-IL experiment configuration"))
  for key, value in data.items():
    doc[key] = value
  return tomlkit.dumps(doc)


def load_config(
  path: Path | None, overrides: dict[str, Any] | None = None
) -> ExperimentConfig:
  """Load a config file, or profile defaults when `path` is None."""
  if path is None:
    return build_config({}, overrides)
  if not path.is_file():
    raise ConfigError(f"config file not found: {path}")
  return parse_config(path.read_text(), overrides)


def save_config(config: ExperimentConfig, path: Path) -> None:
  path.parent.mkdir(parents=True, exist_ok=True)
  path.write_text(dump_config(config))
