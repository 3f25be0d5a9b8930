"""Soft Actor-Critic for the target learner.

The policy and critics read the target environment's state vector; rewards
come from the label networks and are passed in per batch.
"""

import copy
import math
from collections.abc import Sequence
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from diffil.config import SacConfig
from diffil.networks import frozen, mlp

LOG_2 = math.log(2.0)


class GaussianPolicy(nn.Module):
  """Diagonal Gaussian over pre-squash actions, squashed by tanh.

  Args:
      state_dim: Width of the state vector.
      action_dim: Width of the action vector.
      hidden: Hidden layer widths (ReLU).
      log_std_min: Lower clamp of the log standard deviation.
      log_std_max: Upper clamp of the log standard deviation.
  """

  def __init__(
    self,
    state_dim: int,
    action_dim: int,
    hidden: Sequence[int] = (256, 256),
    log_std_min: float = -20.0,
    log_std_max: float = 2.0,
  ) -> None:
    super().__init__()
    self.action_dim = action_dim
    self.log_std_min = log_std_min
    self.log_std_max = log_std_max
    self.net = mlp(state_dim, hidden, 2 * action_dim, nn.ReLU)

  def forward(self, states: Tensor) -> tuple[Tensor, Tensor]:
    """Mean and clamped log-std of the pre-squash Gaussian."""
    mean, log_std = self.net(states).chunk(2, dim=-1)
    return mean, log_std.clamp(self.log_std_min, self.log_std_max)

  def sample(
    self,
    states: Tensor,
    *,
    noise: Tensor | None = None,
    generator: torch.Generator | None = None,
  ) -> tuple[Tensor, Tensor]:
    """Reparameterized squashed sample and its log-probability.

    Args:
        noise: Standard normal noise [B, A]; drawn with `generator` if omitted.

    Returns:
        (action in (-1, 1)^A, log pi(action | state) [B]).
    """
    mean, log_std = self(states)
    if noise is None:
      noise = torch.randn(
        mean.shape, generator=generator, dtype=mean.dtype, device=mean.device
      )
    std = log_std.exp()
    u = mean + std * noise
    gaussian = -0.5 * noise.pow(2) - log_std - 0.5 * math.log(2 * math.pi)
    return torch.tanh(u), (gaussian - tanh_log_det(u)).sum(-1)

  @torch.no_grad()
  def act(
    self,
    states: Tensor,
    *,
    deterministic: bool = False,
    generator: torch.Generator | None = None,
  ) -> Tensor:
    if deterministic:
      return torch.tanh(self(states)[0])
    return self.sample(states, generator=generator)[0]


def tanh_log_det(u: Tensor) -> Tensor:
  """Stable log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u))."""
  return 2 * (LOG_2 - u - F.softplus(-2 * u))


class QNetwork(nn.Module):
  def __init__(
    self, state_dim: int, action_dim: int, hidden: Sequence[int] = (256, 256)
  ) -> None:
    super().__init__()
    self.net = mlp(state_dim + action_dim, hidden, 1, nn.ReLU)

  def forward(self, states: Tensor, actions: Tensor) -> Tensor:
    return self.net(torch.cat([states, actions], dim=-1)).squeeze(-1)


class CriticPair(nn.Module):
  """Twin Q-networks with EMA target copies.

  Target networks never require gradients; they move only through
  `update_targets`.
  """

  def __init__(
    self, state_dim: int, action_dim: int, hidden: Sequence[int] = (256, 256)
  ) -> None:
    super().__init__()
    self.q1 = QNetwork(state_dim, action_dim, hidden)
    self.q2 = QNetwork(state_dim, action_dim, hidden)
    self.target_q1 = copy.deepcopy(self.q1).requires_grad_(False)
    self.target_q2 = copy.deepcopy(self.q2).requires_grad_(False)

  def online(self) -> list[QNetwork]:
    return [self.q1, self.q2]

  def forward(self, states: Tensor, actions: Tensor) -> tuple[Tensor, Tensor]:
    return self.q1(states, actions), self.q2(states, actions)

  def min_q(self, states: Tensor, actions: Tensor) -> Tensor:
    return torch.minimum(*self(states, actions))

  @torch.no_grad()
  def target_min_q(self, states: Tensor, actions: Tensor) -> Tensor:
    return torch.minimum(
      self.target_q1(states, actions), self.target_q2(states, actions)
    )

  def update_targets(self, tau: float) -> None:
    ema_update(self.q1, self.target_q1, tau)
    ema_update(self.q2, self.target_q2, tau)


class EntropyCoef(nn.Module):
  """Entropy coefficient lambda_ent = exp(log_coef), always positive."""

  def __init__(self, init_value: float, target_entropy: float) -> None:
    super().__init__()
    if init_value <= 0:
      msg = f"initial entropy coefficient must be > 0, got {init_value}"
      raise ValueError(msg)
    self.log_coef = nn.Parameter(torch.tensor(math.log(init_value)))
    self.target_entropy = target_entropy

  @property
  def value(self) -> Tensor:
    return self.log_coef.exp()


@torch.no_grad()
def ema_update(online: nn.Module, target: nn.Module, tau: float) -> None:
  """target <- (1 - tau) * target + tau * online, parameter by parameter.

  Raises:
      ValueError: If tau is outside (0, 1].
  """
  if not 0.0 < tau <= 1.0:
    msg = f"tau must lie in (0, 1], got {tau}"
    raise ValueError(msg)
  for target_param, online_param in zip(
    target.parameters(), online.parameters(), strict=True
  ):
    target_param.lerp_(online_param, tau)


@torch.no_grad()
def soft_td_target(
  rewards: Tensor,
  next_q: Tensor,
  next_log_prob: Tensor,
  *,
  gamma: float,
  entropy_coef: Tensor | float,
  done: Tensor | None = None,
) -> Tensor:
  """R + gamma * (1 - done) * (min Q'(s', a') - lambda_ent * log pi(a'|s'))."""
  continuing = 1.0 if done is None else 1.0 - done
  return rewards + gamma * continuing * (next_q - entropy_coef * next_log_prob)


def q_regression_loss(q_values: Sequence[Tensor], target: Tensor) -> Tensor:
  """Sum over critics of 1/2 * E[(Q - target)^2]; the target carries no gradient."""
  target = target.detach()
  return sum(
    (0.5 * (q - target).pow(2).mean() for q in q_values),
    start=target.new_zeros(()),
  )


def critic_loss(
  critics: CriticPair,
  policy: GaussianPolicy,
  states: Tensor,
  actions: Tensor,
  rewards: Tensor,
  next_states: Tensor,
  *,
  gamma: float,
  entropy_coef: Tensor | float,
  done: Tensor | None = None,
  generator: torch.Generator | None = None,
) -> Tensor:
  """Soft Bellman regression of both online critics.

  Raises:
      ValueError: If the batch is empty.
  """
  if len(states) == 0:
    raise ValueError("critic_loss needs a non-empty batch")
  with torch.no_grad():
    next_actions, next_log_prob = policy.sample(next_states, generator=generator)
    target = soft_td_target(
      rewards,
      critics.target_min_q(next_states, next_actions),
      next_log_prob,
      gamma=gamma,
      entropy_coef=entropy_coef,
      done=done,
    )
  return q_regression_loss(critics(states, actions), target)


def actor_loss(
  policy: GaussianPolicy,
  critics: CriticPair,
  states: Tensor,
  entropy_coef: Tensor | float,
  *,
  noise: Tensor | None = None,
  generator: torch.Generator | None = None,
) -> tuple[Tensor, Tensor]:
  """E[lambda_ent * log pi(a|s) - min Q(s, a)] with fresh reparameterized actions.

  Critics are frozen for the pass, so only the policy receives gradients.

  Returns:
      (loss, detached log-probabilities for the entropy update).
  """
  actions, log_prob = policy.sample(states, noise=noise, generator=generator)
  with frozen(critics):
    q = critics.min_q(states, actions)
  coef = entropy_coef.detach() if isinstance(entropy_coef, Tensor) else entropy_coef
  return (coef * log_prob - q).mean(), log_prob.detach()


def entropy_loss(entropy: EntropyCoef, log_prob: Tensor) -> Tensor:
  """E[-lambda_ent * (log pi + target_entropy)], differentiated in log space."""
  return -(entropy.value * (log_prob.detach() + entropy.target_entropy)).mean()


def entropy_update(
  entropy: EntropyCoef, optimizer: torch.optim.Optimizer, log_prob: Tensor
) -> float:
  """One optimizer step on the entropy coefficient; returns the new lambda_ent."""
  optimizer.zero_grad()
  entropy_loss(entropy, log_prob).backward()
  optimizer.step()
  return float(entropy.value.detach())


@dataclass
class SacStepMetrics:
  critic_loss: float
  actor_loss: float
  entropy_loss: float
  entropy_coef: float

  def as_dict(self) -> dict[str, float]:
    return {
      "sac_critic": self.critic_loss,
      "sac_actor": self.actor_loss,
      "sac_entropy": self.entropy_loss,
      "entropy_coef": self.entropy_coef,
    }


class SacAgent(nn.Module):
  """Policy, twin critics and entropy coefficient with their optimizers.

  One `update` makes a critic step, an actor step, an entropy step and an EMA
  step of the target critics, in that order.

  Example:
      agent = SacAgent(state_dim=1, action_dim=1, config=SacConfig())
      metrics = agent.update(states, actions, rewards, next_states)
  """

  def __init__(
    self,
    state_dim: int,
    action_dim: int,
    config: SacConfig,
    *,
    hidden: Sequence[int] = (256, 256),
    lr: float = 1e-3,
  ) -> None:
    super().__init__()
    self.config = config
    self.policy = GaussianPolicy(
      state_dim, action_dim, hidden, config.log_std_min, config.log_std_max
    )
    self.critics = CriticPair(state_dim, action_dim, hidden)
    target_entropy = (
      -float(action_dim) if config.target_entropy is None else config.target_entropy
    )
    self.entropy = EntropyCoef(config.init_entropy_coef, target_entropy)
    self.policy_optimizer = torch.optim.Adam(self.policy.parameters(), lr=lr)
    self.critic_optimizer = torch.optim.Adam(
      [p for q in self.critics.online() for p in q.parameters()], lr=lr
    )
    self.entropy_optimizer = torch.optim.Adam(self.entropy.parameters(), lr=lr)

  def optimizers(self) -> dict[str, torch.optim.Optimizer]:
    return {
      "policy": self.policy_optimizer,
      "critic": self.critic_optimizer,
      "entropy": self.entropy_optimizer,
    }

  def update(
    self,
    states: Tensor,
    actions: Tensor,
    rewards: Tensor,
    next_states: Tensor,
    done: Tensor | None = None,
    *,
    generator: torch.Generator | None = None,
  ) -> SacStepMetrics:
    coef = self.entropy.value.detach()
    q_loss = critic_loss(
      self.critics,
      self.policy,
      states,
      actions,
      rewards,
      next_states,
      gamma=self.config.gamma,
      entropy_coef=coef,
      done=done,
      generator=generator,
    )
    self.critic_optimizer.zero_grad()
    q_loss.backward()
    self.critic_optimizer.step()

    pi_loss, log_prob = actor_loss(
      self.policy, self.critics, states, coef, generator=generator
    )
    self.policy_optimizer.zero_grad()
    pi_loss.backward()
    self.policy_optimizer.step()

    with torch.no_grad():
      ent_loss = entropy_loss(self.entropy, log_prob)
    new_coef = entropy_update(self.entropy, self.entropy_optimizer, log_prob)

    self.critics.update_targets(self.config.tau)
    return SacStepMetrics(
      critic_loss=float(q_loss.detach()),
      actor_loss=float(pi_loss.detach()),
      entropy_loss=float(ent_loss.detach()),
      entropy_coef=new_coef,
    )
