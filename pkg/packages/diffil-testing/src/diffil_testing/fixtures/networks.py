"""Miniature and closed-form networks for loss tests."""

import torch
from torch import Tensor, nn

from diffil.config import NetworkConfig


def miniature_network_config(**overrides: object) -> NetworkConfig:
  """A 4x4-pixel network whose encoder and decoders total under 200 params."""
  values: dict[str, object] = {
    "image_size": 4,
    "feature_dim": 3,
    "seq_len": 2,
    "encoder_filters": (1, 1),
    "encoder_strides": (1, 2),
    "decoder_filters": (1, 1),
    "decoder_strides": (1, 2),
    "critic_hidden": (4,),
    "label_hidden": (4,),
    "actor_hidden": (4,),
  }
  values.update(overrides)
  return NetworkConfig.model_validate(values)


def small_network_config(**overrides: object) -> NetworkConfig:
  """An 8x8-pixel network, small enough for whole training iterations in tests."""
  values: dict[str, object] = {
    "image_size": 8,
    "feature_dim": 4,
    "seq_len": 2,
    "encoder_filters": (4, 4),
    "encoder_strides": (1, 2),
    "decoder_filters": (4, 4),
    "decoder_strides": (1, 2),
    "critic_hidden": (16,),
    "label_hidden": (16,),
    "actor_hidden": (16,),
  }
  values.update(overrides)
  return NetworkConfig.model_validate(values)


class LinearCritic(nn.Module):
  """D(z) = w . z + b with fixed weights; the gradient norm is ||w||."""

  def __init__(self, weight: list[float], bias: float = 0.0) -> None:
    super().__init__()
    self.weight = nn.Parameter(torch.tensor(weight, dtype=torch.float64))
    self.bias = nn.Parameter(torch.tensor(bias, dtype=torch.float64))

  def forward(self, z: Tensor) -> Tensor:
    return z.flatten(1) @ self.weight + self.bias


class ConstantLabelNet(nn.Module):
  """Scores every input with the same probability."""

  def __init__(self, prob: float) -> None:
    super().__init__()
    self.prob = prob

  def forward(self, z: Tensor) -> Tensor:
    return torch.full((len(z),), self.prob, dtype=z.dtype)


class LookupLabelNet(nn.Module):
  """Scores row i with the i-th preset probability."""

  def __init__(self, probs: list[float]) -> None:
    super().__init__()
    self.probs = torch.tensor(probs, dtype=torch.float64)

  def forward(self, z: Tensor) -> Tensor:
    return self.probs[: len(z)].to(z.dtype)
