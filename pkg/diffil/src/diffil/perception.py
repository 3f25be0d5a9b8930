"""Shared frame encoder p and per-domain decoders q^S, q^T.

Images enter and leave the networks channels-last, [B, H, W, 3] floats in
[0, 1]; the convolution stacks run channels-first internally. The encoder is
deterministic: z = p(o).
"""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import torch
from torch import Tensor, nn

from diffil.config import NetworkConfig
from diffil.data.types import DomainTag
from diffil.networks import Net


def _same_padding(kernel_size: int) -> int:
  if kernel_size % 2 == 0:
    msg = f"kernel_size must be odd, got {kernel_size}"
    raise ValueError(msg)
  return kernel_size // 2


class Encoder(nn.Module):
  """Conv stack -> flatten -> Dense(feature_dim).

  Args:
      image_size: Input height and width.
      filters: Output channels per conv layer.
      strides: Stride per conv layer (1 or 2).
      feature_dim: Output width F.
      kernel_size: Odd square kernel size.
      leaky_slope: LeakyReLU negative slope.
  """

  def __init__(
    self,
    image_size: int,
    filters: Sequence[int],
    strides: Sequence[int],
    feature_dim: int,
    kernel_size: int = 3,
    leaky_slope: float = 0.2,
  ) -> None:
    super().__init__()
    self.image_size = image_size
    self.feature_dim = feature_dim
    padding = _same_padding(kernel_size)
    layers: list[nn.Module] = []
    channels = 3
    size = image_size
    for out_channels, stride in zip(filters, strides, strict=True):
      layers += [
        nn.Conv2d(channels, out_channels, kernel_size, stride, padding),
        nn.LeakyReLU(leaky_slope),
      ]
      channels = out_channels
      size = (size + 2 * padding - kernel_size) // stride + 1
    self.conv = nn.Sequential(*layers)
    self.head = nn.Linear(channels * size * size, feature_dim)
    self.reset_parameters()

  def reset_parameters(self) -> None:
    for module in self.modules():
      if isinstance(module, nn.Conv2d | nn.Linear):
        nn.init.trunc_normal_(module.weight, std=0.05)
        nn.init.zeros_(module.bias)

  def forward(self, images: Tensor) -> Tensor:
    if images.ndim != 4 or images.shape[1:] != (self.image_size, self.image_size, 3):
      msg = f"expected [B, {self.image_size}, {self.image_size}, 3] images, "
      msg += f"got {list(images.shape)}"
      raise ValueError(msg)
    features = self.conv(images.permute(0, 3, 1, 2))
    return self.head(features.flatten(1))


class Decoder(nn.Module):
  """Dense projection -> transposed-conv stack -> linear 3-channel layer.

  The projection reshapes z to [filters[0], s, s] with s = image_size /
  prod(strides); each stride-2 layer doubles the resolution.
  """

  def __init__(
    self,
    image_size: int,
    filters: Sequence[int],
    strides: Sequence[int],
    feature_dim: int,
    kernel_size: int = 3,
    leaky_slope: float = 0.2,
  ) -> None:
    super().__init__()
    upsample = 1
    for stride in strides:
      upsample *= stride
    self.image_size = image_size
    self.start_size = image_size // upsample
    self.start_channels = filters[0]
    padding = _same_padding(kernel_size)
    self.project = nn.Linear(
      feature_dim, self.start_channels * self.start_size * self.start_size
    )
    layers: list[nn.Module] = []
    channels = self.start_channels
    for out_channels, stride in zip(filters, strides, strict=True):
      layers += [
        nn.ConvTranspose2d(
          channels,
          out_channels,
          kernel_size,
          stride,
          padding,
          output_padding=stride - 1,
        ),
        nn.LeakyReLU(leaky_slope),
      ]
      channels = out_channels
    layers.append(nn.ConvTranspose2d(channels, 3, kernel_size, 1, padding))
    self.deconv = nn.Sequential(*layers)
    self.reset_parameters()

  def reset_parameters(self) -> None:
    for module in self.modules():
      if isinstance(module, nn.ConvTranspose2d | nn.Linear):
        nn.init.trunc_normal_(module.weight, std=0.05)
        nn.init.zeros_(module.bias)

  def forward(self, z: Tensor) -> Tensor:
    x = self.project(z).view(
      -1, self.start_channels, self.start_size, self.start_size
    )
    return self.deconv(x).permute(0, 2, 3, 1)


class Perception(nn.Module):
  """Encoder p plus one decoder per domain."""

  def __init__(self, network: NetworkConfig) -> None:
    super().__init__()
    self.seq_len = network.seq_len
    self.feature_dim = network.feature_dim
    self.encoder = Encoder(
      network.image_size,
      network.encoder_filters,
      network.encoder_strides,
      network.feature_dim,
      network.kernel_size,
      network.leaky_slope,
    )
    self.decoders = nn.ModuleDict(
      {
        domain.value: Decoder(
          network.image_size,
          network.decoder_filters,
          network.decoder_strides,
          network.feature_dim,
          network.kernel_size,
          network.leaky_slope,
        )
        for domain in DomainTag
      }
    )

  def encode(self, images: Tensor) -> Tensor:
    """[B, H, W, 3] -> [B, F]."""
    return self.encoder(images)

  def encode_sequence(self, sequences: Tensor) -> Tensor:
    """[B, L, H, W, 3] -> [B, L*F], frame features concatenated in time order."""
    return encode_sequence(self.encoder, sequences)

  def decoder(self, domain: DomainTag | str) -> nn.Module:
    try:
      return self.decoders[DomainTag(domain).value]
    except ValueError:
      msg = f"unknown domain {domain!r}"
      raise ValueError(msg) from None

  def decode(self, z: Tensor, domain: DomainTag | str) -> Tensor:
    """[B, F] -> [B, H, W, 3] linear (unclamped) reconstruction."""
    return self.decoder(domain)(z)


def encode_sequence(encoder: Net, sequences: Tensor) -> Tensor:
  """Encode every frame of [B, L, H, W, 3] and concatenate to [B, L*F]."""
  batch, seq_len = sequences.shape[:2]
  features = encoder(sequences.reshape(batch * seq_len, *sequences.shape[2:]))
  return features.reshape(batch, seq_len * features.shape[-1])


@dataclass
class EncDecLossTerms:
  """Reconstruction and feature-consistency losses.

  Attributes:
      recon: Sum over domains of the mean per-sample reconstruction norm.
      fcon: Sum over domains of the mean per-sample feature-consistency norm.
      total: lambda_recon * recon + lambda_fcon * fcon.
  """

  recon: Tensor
  fcon: Tensor
  total: Tensor


def mean_l2(difference: Tensor) -> Tensor:
  """Euclidean norm of each sample's flattened difference, batch-averaged."""
  return torch.linalg.vector_norm(difference.flatten(1), dim=1).mean()


def feature_consistency(z: Tensor, z_cycled: Tensor) -> Tensor:
  """Mean ||stopgrad(z) - z_cycled||; no gradient reaches `z` through here."""
  return mean_l2(z.detach() - z_cycled)


def enc_dec_loss(
  encoder: Net,
  decoders: Mapping[DomainTag, Net],
  batch_source: Tensor,
  batch_target: Tensor,
  *,
  lambda_recon: float = 1.0,
  lambda_fcon: float = 1.0,
) -> EncDecLossTerms:
  """Reconstruction plus cross-domain feature-consistency loss.

  For each domain d with opposite domain d':
    recon_d = E||o^d - q^d(p(o^d))||
    fcon_d  = E||stopgrad(p(o^d)) - p(q^{d'}(p(o^d)))||

  Args:
      encoder: Shared encoder p.
      decoders: Decoder per domain.
      batch_source: Source frames [B, H, W, 3] in [0, 1].
      batch_target: Target frames [B', H, W, 3] in [0, 1].
      lambda_recon: Reconstruction weight.
      lambda_fcon: Feature-consistency weight.

  Returns:
      The loss terms; gradients reach p, q^S and q^T except through the
      stopped feature target.
  """
  if len(batch_source) == 0 or len(batch_target) == 0:
    raise ValueError("enc_dec_loss needs non-empty batches from both domains")
  recon = batch_source.new_zeros(())
  fcon = batch_source.new_zeros(())
  batches = {DomainTag.SOURCE: batch_source, DomainTag.TARGET: batch_target}
  for domain, images in batches.items():
    z = encoder(images)
    recon = recon + mean_l2(images - decoders[domain](z))
    z_cycled = encoder(decoders[domain.opposite](z))
    fcon = fcon + feature_consistency(z, z_cycled)
  return EncDecLossTerms(
    recon=recon, fcon=fcon, total=lambda_recon * recon + lambda_fcon * fcon
  )
