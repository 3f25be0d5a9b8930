"""Label discriminators, frame-wise time labels and the imitation reward.

F_label,s scores how expert-like a latent sequence is; F_label,f scores how
far along an expert episode a single latent frame is. The learner's reward
at step t uses both scores on the observations at t+1.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import torch
from torch import Tensor, nn

from diffil.data.types import DomainTag
from diffil.networks import Net, joint_forward, mlp

BCE_CLIP = 1e-7
REWARD_EPS = 1e-12


class LabelNet(nn.Module):
  """BatchNorm -> Dense+LeakyReLU stack -> Dense(1, sigmoid), output in (0, 1)."""

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
    return torch.sigmoid(self.net(z.flatten(1))).squeeze(-1)


def time_label(t: int, episode_len: int, is_expert: bool) -> float:
  """((t / H) + 1) / 2 for expert frames, 0 otherwise.

  Raises:
      ValueError: If t is outside [0, H] or H < 1.
  """
  if episode_len < 1:
    msg = f"episode_len must be >= 1, got {episode_len}"
    raise ValueError(msg)
  if not 0 <= t <= episode_len:
    msg = f"t={t} outside [0, {episode_len}]"
    raise ValueError(msg)
  if not is_expert:
    return 0.0
  return (t / episode_len + 1) / 2


def time_labels(
  t: npt.NDArray[np.int64],
  episode_len: npt.NDArray[np.int64],
  is_expert: npt.NDArray[np.bool_],
) -> npt.NDArray[np.float64]:
  """Vectorized `time_label`."""
  if np.any(episode_len < 1) or np.any(t < 0) or np.any(t > episode_len):
    raise ValueError("time labels need 0 <= t <= episode_len and episode_len >= 1")
  return np.where(is_expert, (t / episode_len + 1) / 2, 0.0)


def bce(target: Tensor, prob: Tensor) -> Tensor:
  """Per-sample binary cross-entropy with soft targets.

  Probabilities are clipped to [1e-7, 1 - 1e-7] so the loss is always
  finite; the minimum over prob is at prob == target.
  """
  p = prob.clamp(BCE_CLIP, 1 - BCE_CLIP)
  return -(target * torch.log(p) + (1 - target) * torch.log(1 - p))


@dataclass
class LabelLossTerms:
  """Weighted label losses.

  Attributes:
      seq_loss_source: lambda^S * E[BCE] over source sequences.
      seq_loss_target: lambda^T * E[BCE] over target sequences.
      frame_loss: lambda_f * E[BCE(y, F_label,f(z))] over source frames.
  """

  seq_loss_source: Tensor
  seq_loss_target: Tensor
  frame_loss: Tensor

  @property
  def seq_loss(self) -> Tensor:
    return self.seq_loss_source + self.seq_loss_target

  @property
  def total(self) -> Tensor:
    return self.seq_loss + self.frame_loss


def seq_label_loss(
  label_s: Net,
  zseq_source: Tensor,
  expert_source: Tensor,
  zseq_target: Tensor,
  *,
  lambda_source: float = 10.0,
  lambda_target: float = 1e-3,
) -> tuple[Tensor, Tensor]:
  """Sequence label loss, target 1 iff the sequence comes from the source experts.

  Target-domain sequences are never expert. Gradients reach F_label,s and
  the encoder that produced the latents.

  Args:
      expert_source: Bool [B] marking source-expert sequences.

  Returns:
      (source term, target term), each already weighted by its lambda.
  """
  prob_source, prob_target = joint_forward(label_s, zseq_source, zseq_target)
  source_targets = expert_source.to(zseq_source.dtype)
  source_term = bce(source_targets, prob_source).mean()
  target_targets = torch.zeros(
    len(zseq_target), dtype=zseq_target.dtype, device=zseq_target.device
  )
  target_term = bce(target_targets, prob_target).mean()
  return lambda_source * source_term, lambda_target * target_term


def frame_label_loss(
  label_f: Net,
  z_source: Tensor,
  y: Tensor,
  domains: Sequence[DomainTag] | None = None,
  *,
  lambda_frame: float = 10.0,
) -> Tensor:
  """Frame label loss over source-domain frames with soft time labels.

  Latents are detached; only F_label,f is trained by this loss.

  Raises:
      ValueError: If any frame is tagged with the target domain.
  """
  if domains is not None and any(d is not DomainTag.SOURCE for d in domains):
    raise ValueError("frame labels are trained on source-domain frames only")
  return lambda_frame * bce(y.to(z_source.dtype), label_f(z_source.detach())).mean()


def reward(seq_score: Tensor, frame_score: Tensor, eps: float = REWARD_EPS) -> Tensor:
  """R = -log(1 - F_s * F_f + eps), in [-log(1 + eps), -log(eps)]."""
  return -torch.log(1 - seq_score * frame_score + eps)


@torch.no_grad()
def reward_from_latents(
  label_s: Net,
  label_f: Net | None,
  zseq_next: Tensor,
  z_next: Tensor,
  eps: float = REWARD_EPS,
) -> Tensor:
  """Reward from the latents of the observations at t+1.

  With `label_f` None (frame labels ablated) the frame score is taken as 1.
  """
  seq_score = label_s(zseq_next)
  frame_score = torch.ones_like(seq_score) if label_f is None else label_f(z_next)
  return reward(seq_score, frame_score, eps)
