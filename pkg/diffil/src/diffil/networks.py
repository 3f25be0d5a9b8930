"""Shared network building blocks and gradient-flow helpers."""

from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager

import numpy as np
import numpy.typing as npt
import torch
from torch import Tensor, nn

from diffil.errors import NumericError

# Any callable mapping a batch to a batch; nn.Modules and functional_call
# closures are both accepted by the loss functions.
Net = Callable[[Tensor], Tensor]


def mlp(
  in_dim: int,
  hidden: Sequence[int],
  out_dim: int,
  activation: Callable[[], nn.Module],
  *,
  batch_norm: bool = False,
) -> nn.Sequential:
  """Dense stack: [BatchNorm] -> (Linear -> activation)* -> Linear."""
  layers: list[nn.Module] = []
  if batch_norm:
    layers.append(nn.BatchNorm1d(in_dim))
  width = in_dim
  for units in hidden:
    layers += [nn.Linear(width, units), activation()]
    width = units
  layers.append(nn.Linear(width, out_dim))
  return nn.Sequential(*layers)


@contextmanager
def frozen(*modules: nn.Module) -> Iterator[None]:
  """Exclude modules' parameters from the autograd graph built inside.

  BatchNorm layers keep normalizing with batch statistics, but their running
  statistics are not updated while frozen.
  """
  saved_grad: list[tuple[nn.Parameter, bool]] = []
  saved_momentum: list[tuple[nn.modules.batchnorm._BatchNorm, float | None]] = []
  for module in modules:
    for param in module.parameters():
      saved_grad.append((param, param.requires_grad))
      param.requires_grad_(False)
    for layer in module.modules():
      if isinstance(layer, nn.modules.batchnorm._BatchNorm):
        saved_momentum.append((layer, layer.momentum))
        layer.momentum = 0.0
  try:
    yield
  finally:
    for param, requires_grad in saved_grad:
      param.requires_grad_(requires_grad)
    for layer, momentum in saved_momentum:
      layer.momentum = momentum


def joint_forward(net: Net, first: Tensor, second: Tensor) -> tuple[Tensor, Tensor]:
  """Run `net` once on both batches stacked, then split its output.

  BatchNorm layers then normalize both batches with shared statistics, so a
  shift between them survives into the output.
  """
  out = net(torch.cat([first, second]))
  return out[: len(first)], out[len(first) :]


def pixels_to_tensor(
  pixels: npt.NDArray[np.uint8],
  *,
  dtype: torch.dtype = torch.float32,
  device: torch.device | str | None = None,
) -> Tensor:
  """uint8 pixels -> floats in [0, 1], shape preserved."""
  return torch.as_tensor(pixels, device=device).to(dtype) / 255.0


def check_finite(terms: dict[str, Tensor | float]) -> None:
  """Raise NumericError naming the first non-finite loss term."""
  for name, value in terms.items():
    scalar = float(value.detach()) if isinstance(value, Tensor) else float(value)
    if not np.isfinite(scalar):
      raise NumericError(name, scalar)


def num_parameters(module: nn.Module) -> int:
  return sum(p.numel() for p in module.parameters())
