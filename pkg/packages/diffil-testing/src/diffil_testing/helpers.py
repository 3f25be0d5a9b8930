"""
Gradient oracles

Compare analytic gradients of DIFF-IL losses with central finite
differences, both with respect to network parameters and to inputs.
"""

from collections.abc import Callable, Mapping
from typing import Any

import torch
from torch import Tensor, nn
from torch.func import functional_call

from diffil.networks import Net

GRADCHECK_EPS = 1e-6
GRADCHECK_RTOL = 1e-4
GRADCHECK_ATOL = 1e-7


def _bind(
  module: nn.Module, names: list[str], values: tuple[Tensor, ...]
) -> Callable[..., Tensor]:
  params = dict(zip(names, values, strict=True))

  def net(*args: Any) -> Tensor:
    return functional_call(module, params, args)

  return net


def param_gradcheck(
  modules: Mapping[str, nn.Module],
  loss_of: Callable[[dict[str, Net]], Tensor],
  *,
  eps: float = GRADCHECK_EPS,
  rtol: float = GRADCHECK_RTOL,
  atol: float = GRADCHECK_ATOL,
) -> bool:
  """Gradcheck a scalar loss against every parameter of float64 modules.

  The loss is rebuilt on each evaluation from stand-ins that run the named
  modules with the parameter values under test (via `functional_call`).

  Example:
      ok = param_gradcheck(
        {"critic": critic},
        lambda nets: wasserstein_term(nets["critic"], z_s, z_t),
      )
  """
  layout: list[tuple[str, list[str]]] = []
  inputs: list[Tensor] = []
  for key, module in modules.items():
    names = []
    for name, param in module.named_parameters():
      if param.dtype != torch.float64:
        msg = f"{key}.{name} is {param.dtype}; gradcheck needs float64"
        raise ValueError(msg)
      names.append(name)
      inputs.append(param.detach().clone().requires_grad_(True))
    layout.append((key, names))

  def loss(*values: Tensor) -> Tensor:
    nets: dict[str, Net] = {}
    offset = 0
    for key, names in layout:
      nets[key] = _bind(modules[key], names, values[offset : offset + len(names)])
      offset += len(names)
    return loss_of(nets)

  return torch.autograd.gradcheck(
    loss, tuple(inputs), eps=eps, atol=atol, rtol=rtol
  )


def input_gradcheck(
  fn: Callable[..., Tensor],
  *inputs: Tensor,
  eps: float = GRADCHECK_EPS,
  rtol: float = GRADCHECK_RTOL,
  atol: float = GRADCHECK_ATOL,
) -> bool:
  """Gradcheck `fn` with respect to float64 input tensors."""
  leaves = tuple(x.detach().clone().double().requires_grad_(True) for x in inputs)
  return torch.autograd.gradcheck(fn, leaves, eps=eps, atol=atol, rtol=rtol)
