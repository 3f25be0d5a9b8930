"""All networks of one run and the optimizers that train them."""

from pathlib import Path

import torch
from torch import nn

from diffil.adversary import CriticNet
from diffil.checkpoint import load_checkpoint, save_checkpoint
from diffil.config import ExperimentConfig, load_config
from diffil.data.types import DomainTag
from diffil.envs.registry import make_env
from diffil.labeling import LabelNet
from diffil.perception import Perception
from diffil.sac import SacAgent

CHECKPOINT_DIR = "checkpoint"
CONFIG_NAME = "config.toml"


class DiffilModel(nn.Module):
  """Perception, critics, label networks and the learner agent.

  Optimizers (Adam, shared learning rate):
      perception_optimizer: encoder and both decoders.
      critic_optimizer: D_f and D_s.
      label_optimizer: F_label,s and F_label,f.
  The SAC agent owns its own optimizers.
  """

  def __init__(
    self, config: ExperimentConfig, state_dim: int, action_dim: int
  ) -> None:
    super().__init__()
    net = config.network
    seq_dim = net.seq_len * net.feature_dim
    self.perception = Perception(net)
    self.critic_frame = CriticNet(net.feature_dim, net.critic_hidden, net.leaky_slope)
    self.critic_seq = CriticNet(seq_dim, net.critic_hidden, net.leaky_slope)
    self.label_seq = LabelNet(seq_dim, net.label_hidden, net.leaky_slope)
    self.label_frame = LabelNet(net.feature_dim, net.label_hidden, net.leaky_slope)
    self.agent = SacAgent(
      state_dim, action_dim, config.sac, hidden=net.actor_hidden, lr=config.lr
    )
    self.perception_optimizer = torch.optim.Adam(
      self.perception.parameters(), lr=config.lr
    )
    self.critic_optimizer = torch.optim.Adam(
      [*self.critic_frame.parameters(), *self.critic_seq.parameters()], lr=config.lr
    )
    self.label_optimizer = torch.optim.Adam(
      [*self.label_seq.parameters(), *self.label_frame.parameters()], lr=config.lr
    )

  def optimizers(self) -> dict[str, torch.optim.Optimizer]:
    return {
      "perception": self.perception_optimizer,
      "critic": self.critic_optimizer,
      "label": self.label_optimizer,
      **{f"agent_{k}": v for k, v in self.agent.optimizers().items()},
    }

  def networks(self) -> dict[str, nn.Module]:
    """Checkpointed networks by file name."""
    return {
      "encoder": self.perception.encoder,
      "decoder_source": self.perception.decoder(DomainTag.SOURCE),
      "decoder_target": self.perception.decoder(DomainTag.TARGET),
      "critic_frame": self.critic_frame,
      "critic_seq": self.critic_seq,
      "label_seq": self.label_seq,
      "label_frame": self.label_frame,
      "policy": self.agent.policy,
      "q_critics": self.agent.critics,
      "entropy": self.agent.entropy,
    }

  def save(self, directory: Path) -> None:
    save_checkpoint(directory, self.networks())

  def load(self, directory: Path) -> None:
    load_checkpoint(directory, self.networks())


def load_trained_model(run_dir: Path) -> tuple[ExperimentConfig, DiffilModel]:
  """The config and checkpointed networks of a training run.

  Raises:
      ConfigError: If the run has no readable config.
      DataFormatError: If a network checkpoint is missing or malformed.
  """
  config = load_config(run_dir / CONFIG_NAME)
  env = make_env(
    config.env.name, DomainTag.TARGET, config.env.episode_len, config.network.image_size
  )
  model = DiffilModel(config, env.state_dim, env.action_dim)
  model.load(run_dir / CHECKPOINT_DIR)
  model.eval()
  return config, model
