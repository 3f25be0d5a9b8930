"""Frame and sequence WGAN critics, their losses and the update schedule.

Critics see latents only. The discriminator loss trains D_f and D_s on
detached latents; the generator loss trains the encoder against frozen
critics. alpha balances the frame terms against the sequence terms.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import torch
from torch import Tensor, nn

from diffil.errors import ConfigError
from diffil.networks import Net, frozen, joint_forward, mlp


class CriticNet(nn.Module):
  """BatchNorm -> Dense+LeakyReLU stack -> Dense(1) (linear), scalar per sample."""

  def __init__(
    self,
    in_dim: int,
    hidden: Sequence[int] = (400, 300),
    leaky_slope: float = 0.2,
  ) -> None:
    super().__init__()
    self.net = mlp(
      in_dim,
      hidden,
      1,
      lambda: nn.LeakyReLU(leaky_slope),
      batch_norm=True,
    )

  def forward(self, z: Tensor) -> Tensor:
    return self.net(z).squeeze(-1)


@dataclass
class WganLossTerms:
  """Frame/sequence WGAN terms and their alpha-weighted combinations.

  The discriminator pass fills disc_f, disc_s, gp and unified_disc; the
  generator pass fills gen_f, gen_s and unified_gen.
  """

  disc_f: Tensor | None = None
  disc_s: Tensor | None = None
  gen_f: Tensor | None = None
  gen_s: Tensor | None = None
  gp: Tensor | None = None
  unified_disc: Tensor | None = None
  unified_gen: Tensor | None = None

  def scalars(self) -> dict[str, float]:
    """Populated terms as floats, for metrics rows."""
    return {
      name: float(value.detach())
      for name, value in vars(self).items()
      if isinstance(value, Tensor)
    }

  def require(self, name: str) -> Tensor:
    """A term that must have been computed by this pass."""
    value = getattr(self, name)
    if value is None:
      msg = f"{name} was not computed by this pass"
      raise ValueError(msg)
    return value


def _check_batches(*batches: Tensor) -> int:
  sizes = {len(batch) for batch in batches}
  if len(sizes) != 1:
    msg = f"batch sizes differ across WGAN inputs: {[len(b) for b in batches]}"
    raise ValueError(msg)
  size = sizes.pop()
  if size == 0:
    raise ValueError("WGAN inputs are empty")
  return size


def wasserstein_term(critic: Net, z_source: Tensor, z_target: Tensor) -> Tensor:
  """E[-D(z^S) + D(z^T)], with both domains in one critic pass."""
  out_source, out_target = joint_forward(critic, z_source, z_target)
  return (-out_source + out_target).mean()


def gradient_penalty(
  critic_f: Net,
  critic_s: Net,
  z_source: Tensor,
  z_target: Tensor,
  zseq_source: Tensor,
  zseq_target: Tensor,
  alpha: float,
  delta: Tensor,
) -> Tensor:
  """Penalty on the combined critic gradient at interpolated latents.

  With delta_f = delta*z^S + (1-delta)*z^T and delta_s likewise for the
  sequences, each sample contributes
      (|| [alpha * dD_f/d delta_f ; (1-alpha) * dD_s/d delta_s] ||_2 - 1)^2
  and the penalty is the batch mean. One delta is shared by the frame and
  sequence interpolates of a sample.

  Args:
      delta: Per-sample interpolation factors in [0, 1], shape [B].

  Raises:
      ValueError: If any delta lies outside [0, 1] or batch sizes differ.
  """
  batch = _check_batches(z_source, z_target, zseq_source, zseq_target)
  delta = delta.reshape(-1)
  if len(delta) != batch:
    msg = f"delta has {len(delta)} entries for a batch of {batch}"
    raise ValueError(msg)
  if bool(((delta < 0) | (delta > 1)).any()):
    raise ValueError("delta must lie in [0, 1]")
  d = delta.to(z_source.dtype).unsqueeze(-1)
  delta_f = (d * z_source + (1 - d) * z_target).detach().requires_grad_(True)
  delta_s = (d * zseq_source + (1 - d) * zseq_target).detach().requires_grad_(True)
  out_f = critic_f(delta_f)
  out_s = critic_s(delta_s)
  grads = torch.autograd.grad(
    outputs=[out_f.sum(), out_s.sum()],
    inputs=[delta_f, delta_s],
    create_graph=True,
    allow_unused=True,
  )
  grad_f = grads[0] if grads[0] is not None else torch.zeros_like(delta_f)
  grad_s = grads[1] if grads[1] is not None else torch.zeros_like(delta_s)
  combined = torch.cat([alpha * grad_f, (1 - alpha) * grad_s], dim=1)
  norms = torch.linalg.vector_norm(combined, dim=1)
  return ((norms - 1) ** 2).mean()


def disc_loss(
  critic_f: Net,
  critic_s: Net,
  z_source: Tensor,
  z_target: Tensor,
  zseq_source: Tensor,
  zseq_target: Tensor,
  *,
  alpha: float = 0.5,
  lambda_disc: float = 1.0,
  lambda_gp: float = 10.0,
  delta: Tensor | None = None,
  generator: torch.Generator | None = None,
) -> WganLossTerms:
  """Critic loss on detached latents.

  disc_f = mean(-D_f(z^S) + D_f(z^T)), disc_s likewise with D_s, and
  unified_disc = lambda_disc * (alpha*disc_f + (1-alpha)*disc_s)
  + lambda_gp * gp.

  Args:
      delta: Interpolation factors for the penalty; drawn uniformly from
          [0, 1) with `generator` when omitted.
  """
  batch = _check_batches(z_source, z_target, zseq_source, zseq_target)
  z_source, z_target = z_source.detach(), z_target.detach()
  zseq_source, zseq_target = zseq_source.detach(), zseq_target.detach()
  if delta is None:
    delta = torch.rand(
      batch, generator=generator, dtype=z_source.dtype, device=z_source.device
    )
  disc_f = wasserstein_term(critic_f, z_source, z_target)
  disc_s = wasserstein_term(critic_s, zseq_source, zseq_target)
  gp = gradient_penalty(
    critic_f, critic_s, z_source, z_target, zseq_source, zseq_target, alpha, delta
  )
  unified = lambda_disc * (alpha * disc_f + (1 - alpha) * disc_s) + lambda_gp * gp
  return WganLossTerms(disc_f=disc_f, disc_s=disc_s, gp=gp, unified_disc=unified)


def gen_loss(
  critic_f: Net,
  critic_s: Net,
  z_source: Tensor,
  z_target: Tensor,
  zseq_source: Tensor,
  zseq_target: Tensor,
  *,
  alpha: float = 0.5,
  lambda_gen: float = 1.0,
) -> WganLossTerms:
  """Encoder loss against frozen critics.

  gen_f = mean(D_f(z^S) - D_f(z^T)) = -disc_f, gen_s likewise, and
  unified_gen = lambda_gen * (alpha*gen_f + (1-alpha)*gen_s). Critic modules
  are frozen for the pass, so gradients reach only the latents' producers.
  """
  _check_batches(z_source, z_target, zseq_source, zseq_target)
  modules = [c for c in (critic_f, critic_s) if isinstance(c, nn.Module)]
  with frozen(*modules):
    gen_f = -wasserstein_term(critic_f, z_source, z_target)
    gen_s = -wasserstein_term(critic_s, zseq_source, zseq_target)
  unified = lambda_gen * (alpha * gen_f + (1 - alpha) * gen_s)
  return WganLossTerms(gen_f=gen_f, gen_s=gen_s, unified_gen=unified)


def is_generator_step(k: int, period: int) -> bool:
  """Whether model step k (1-based) also updates encoder, decoders and labels."""
  if period < 1:
    msg = f"generator period must be >= 1, got {period}"
    raise ConfigError(msg)
  return k % period == 0


def update_mask(n_steps: int, period: int) -> list[bool]:
  """Generator-step flags for model steps k = 1..n_steps.

  Critics update on every step, so an epoch makes n_steps critic updates and
  n_steps // period generator updates.
  """
  return [is_generator_step(k, period) for k in range(1, n_steps + 1)]
