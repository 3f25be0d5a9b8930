"""Training loop, run state and metrics log."""

from diffil.training.metrics import METRICS_NAME, MetricsLog, MetricsRow
from diffil.training.model import (
  CHECKPOINT_DIR,
  CONFIG_NAME,
  DiffilModel,
  load_trained_model,
)
from diffil.training.trainer import (
  EVENT_COLLECT,
  EVENT_CRITIC,
  EVENT_CRITIC_GENERATOR,
  EVENT_RL,
  RUN_STATE_NAME,
  Trainer,
  evaluate_policy,
  load_learner_buffer,
)

__all__ = [
  "CHECKPOINT_DIR",
  "CONFIG_NAME",
  "EVENT_COLLECT",
  "EVENT_CRITIC",
  "EVENT_CRITIC_GENERATOR",
  "EVENT_RL",
  "METRICS_NAME",
  "RUN_STATE_NAME",
  "DiffilModel",
  "MetricsLog",
  "MetricsRow",
  "Trainer",
  "evaluate_policy",
  "load_learner_buffer",
  "load_trained_model",
]
