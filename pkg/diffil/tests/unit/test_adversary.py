"""Tests for the WGAN critics, losses and update schedule."""

import math

import pytest
import torch
from diffil.adversary import (
  CriticNet,
  disc_loss,
  gen_loss,
  gradient_penalty,
  is_generator_step,
  update_mask,
  wasserstein_term,
)
from diffil.errors import ConfigError
from diffil.networks import Net
from diffil_testing import LinearCritic, input_gradcheck, param_gradcheck
from hamcrest import assert_that, close_to, equal_to

F64 = torch.float64


def _latents(batch: int, dim: int, seed: int) -> torch.Tensor:
  generator = torch.Generator().manual_seed(seed)
  return torch.randn(batch, dim, generator=generator, dtype=F64)


@pytest.fixture
def latents() -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
  """(z^S, z^T, zseq^S, zseq^T) for B=4, F=3, L=2."""
  return _latents(4, 3, 0), _latents(4, 3, 1), _latents(4, 6, 2), _latents(4, 6, 3)


class TestLinearCritics:
  """Closed-form values with linear critics."""

  def test_wasserstein_term(self) -> None:
    """Test E[-D(z^S) + D(z^T)] = w . (mean z^T - mean z^S)."""
    critic = LinearCritic([1.0, -2.0], bias=0.5)
    z_source = torch.tensor([[1.0, 0.0], [3.0, 2.0]], dtype=F64)
    z_target = torch.tensor([[0.0, 1.0], [2.0, 1.0]], dtype=F64)

    value = wasserstein_term(critic, z_source, z_target)

    # mean difference (-1, 0) -> w . d = -1
    assert_that(float(value), close_to(-1.0, 1e-12))

  def test_gp_of_unit_norm_critic_is_zero(self) -> None:
    """Test a critic with unit combined gradient has no penalty."""
    critic_f = LinearCritic([2.0, 0.0])
    critic_s = LinearCritic([0.0, 0.0, 0.0, 0.0])
    z_s, z_t = _latents(3, 2, 0), _latents(3, 2, 1)
    zseq_s, zseq_t = _latents(3, 4, 2), _latents(3, 4, 3)

    gp = gradient_penalty(
      critic_f, critic_s, z_s, z_t, zseq_s, zseq_t, 0.5, torch.rand(3, dtype=F64)
    )

    assert_that(float(gp), close_to(0.0, 1e-12))

  def test_gp_of_linear_critics(self) -> None:
    """Test GP = (||[alpha w_f ; (1-alpha) w_s]|| - 1)^2."""
    critic_f = LinearCritic([3.0, 4.0])
    critic_s = LinearCritic([0.0, 1.0, 0.0, 1.0])
    z_s, z_t = _latents(5, 2, 0), _latents(5, 2, 1)
    zseq_s, zseq_t = _latents(5, 4, 2), _latents(5, 4, 3)
    alpha = 0.25

    gp = gradient_penalty(
      critic_f, critic_s, z_s, z_t, zseq_s, zseq_t, alpha, torch.rand(5, dtype=F64)
    )

    norm = math.sqrt((alpha * 5.0) ** 2 + ((1 - alpha) * math.sqrt(2.0)) ** 2)
    assert_that(float(gp), close_to((norm - 1) ** 2, 1e-9))

  def test_gp_single_critic(self) -> None:
    """Test GP with a zero sequence critic is (alpha |w_f| - 1)^2."""
    critic_f = LinearCritic([0.6, 0.8, 2.0])
    critic_s = LinearCritic([0.0] * 6)
    z_s, z_t = _latents(2, 3, 0), _latents(2, 3, 1)
    zseq_s, zseq_t = _latents(2, 6, 2), _latents(2, 6, 3)

    gp = gradient_penalty(
      critic_f, critic_s, z_s, z_t, zseq_s, zseq_t, 0.5, torch.rand(2, dtype=F64)
    )

    w = math.sqrt(0.36 + 0.64 + 4.0)
    assert_that(float(gp), close_to((0.5 * w - 1) ** 2, 1e-9))

  def test_unified_disc_combines_terms(self) -> None:
    """Test unified = lambda_disc (alpha D_f + (1-alpha) D_s) + lambda_gp GP."""
    critic_f = LinearCritic([1.0, 1.0])
    critic_s = LinearCritic([0.5, 0.0, 0.0, -0.5])
    z_s, z_t = _latents(4, 2, 0), _latents(4, 2, 1)
    zseq_s, zseq_t = _latents(4, 4, 2), _latents(4, 4, 3)

    terms = disc_loss(
      critic_f,
      critic_s,
      z_s,
      z_t,
      zseq_s,
      zseq_t,
      alpha=0.3,
      lambda_disc=2.0,
      lambda_gp=10.0,
      delta=torch.full((4,), 0.5, dtype=F64),
    )

    disc_f = float(wasserstein_term(critic_f, z_s, z_t))
    disc_s = float(wasserstein_term(critic_s, zseq_s, zseq_t))
    expected = 2.0 * (0.3 * disc_f + 0.7 * disc_s) + 10.0 * float(terms.gp)
    assert_that(float(terms.unified_disc), close_to(expected, 1e-12))
    assert_that(float(terms.disc_f), close_to(disc_f, 1e-12))

  def test_gen_terms_negate_disc_terms(self) -> None:
    """Test the generator terms are the negated critic terms."""
    critic_f = LinearCritic([1.0, -1.0])
    critic_s = LinearCritic([0.2, 0.1, 0.0, 0.3])
    z_s, z_t = _latents(4, 2, 0), _latents(4, 2, 1)
    zseq_s, zseq_t = _latents(4, 4, 2), _latents(4, 4, 3)

    gen = gen_loss(critic_f, critic_s, z_s, z_t, zseq_s, zseq_t, alpha=0.5)
    disc = disc_loss(
      critic_f, critic_s, z_s, z_t, zseq_s, zseq_t, delta=torch.zeros(4, dtype=F64)
    )

    assert_that(float(gen.require("gen_f")), close_to(-float(disc.disc_f), 1e-12))
    assert_that(float(gen.require("gen_s")), close_to(-float(disc.disc_s), 1e-12))


class TestSharedBatchNorm:
  """Source and target latents share one critic pass."""

  @staticmethod
  def _monotone_critic(in_dim: int) -> CriticNet:
    critic = CriticNet(in_dim, (16,)).double()
    for layer in critic.modules():
      if isinstance(layer, torch.nn.Linear):
        torch.nn.init.constant_(layer.weight, 0.1)
        torch.nn.init.zeros_(layer.bias)
    return critic.train()

  def test_shifted_domains_stay_apart(self) -> None:
    """Test a constant shift between domains gives a clearly nonzero term."""
    critic = self._monotone_critic(4)
    z_target = _latents(64, 4, 5)
    z_source = z_target + 5.0

    term = wasserstein_term(critic, z_source, z_target)

    assert float(term) < -0.3

  def test_separate_passes_would_hide_the_shift(self) -> None:
    """Test per-domain BatchNorm statistics cancel a constant shift."""
    critic = self._monotone_critic(4)
    z_target = _latents(64, 4, 5)
    z_source = z_target + 5.0

    separate = (-critic(z_source) + critic(z_target)).mean()

    assert_that(float(separate), close_to(0.0, 1e-9))

  def test_disc_and_gen_terms_see_the_shift(self) -> None:
    """Test both loss passes keep the shift visible to the critics."""
    critic_f = self._monotone_critic(4)
    critic_s = self._monotone_critic(8)
    z_target, zseq_target = _latents(64, 4, 6), _latents(64, 8, 7)

    disc = disc_loss(
      critic_f, critic_s, z_target + 5.0, z_target, zseq_target + 5.0, zseq_target
    )
    gen = gen_loss(
      critic_f, critic_s, z_target + 5.0, z_target, zseq_target + 5.0, zseq_target
    )

    assert float(disc.require("disc_f")) < -0.3
    assert float(disc.require("disc_s")) < -0.3
    assert float(gen.require("gen_f")) > 0.3


class TestPreconditions:
  """Invalid inputs."""

  def test_delta_out_of_range(self, latents) -> None:
    """Test interpolation factors must lie in [0, 1]."""
    critic_f, critic_s = CriticNet(3, (4,)).double(), CriticNet(6, (4,)).double()

    with pytest.raises(ValueError):
      gradient_penalty(
        critic_f, critic_s, *latents, 0.5, torch.tensor([0.1, 0.2, 1.5, 0.0])
      )

  def test_batch_mismatch(self) -> None:
    """Test all latent batches must have the same size."""
    critic = LinearCritic([1.0, 1.0])

    with pytest.raises(ValueError):
      disc_loss(
        critic,
        critic,
        _latents(3, 2, 0),
        _latents(4, 2, 1),
        _latents(3, 2, 2),
        _latents(3, 2, 3),
      )

  def test_missing_term(self) -> None:
    """Test asking a critic pass for a generator term fails."""
    critic = LinearCritic([1.0, 1.0])
    z = _latents(2, 2, 0)

    terms = disc_loss(critic, critic, z, z, z, z, delta=torch.zeros(2, dtype=F64))

    with pytest.raises(ValueError):
      terms.require("unified_gen")


class TestGradientFlow:
  """Which parameters each loss trains."""

  def test_disc_loss_does_not_reach_latents(self, latents) -> None:
    """Test the critic loss is computed on detached latents."""
    z_s = latents[0].clone().requires_grad_(True)
    critic_f, critic_s = CriticNet(3, (4,)).double(), CriticNet(6, (4,)).double()

    terms = disc_loss(critic_f, critic_s, z_s, *latents[1:])
    terms.require("unified_disc").backward()

    assert z_s.grad is None
    assert all(p.grad is not None for p in critic_f.parameters())

  def test_gen_loss_freezes_critics(self, latents) -> None:
    """Test the generator loss trains latents but not critics."""
    z_s = latents[0].clone().requires_grad_(True)
    critic_f, critic_s = CriticNet(3, (4,)).double(), CriticNet(6, (4,)).double()

    terms = gen_loss(critic_f, critic_s, z_s, *latents[1:])
    terms.require("unified_gen").backward()

    assert z_s.grad is not None
    assert all(p.grad is None for p in critic_f.parameters())
    assert all(p.requires_grad for p in critic_f.parameters())


class TestGradientOracle:
  """Analytic gradients against central finite differences."""

  def test_disc_loss_parameter_gradients(self, latents) -> None:
    """Test critic gradients, including through the gradient penalty."""
    torch.manual_seed(0)
    critics = {
      "frame": CriticNet(3, (4,)).double(),
      "seq": CriticNet(6, (4,)).double(),
    }
    delta = torch.tensor([0.1, 0.4, 0.6, 0.9], dtype=F64)

    def loss(nets: dict[str, Net]) -> torch.Tensor:
      terms = disc_loss(
        nets["frame"], nets["seq"], *latents, alpha=0.4, delta=delta
      )
      return terms.require("unified_disc")

    assert_that(param_gradcheck(critics, loss), equal_to(True))

  def test_gen_loss_latent_gradients(self, latents) -> None:
    """Test generator gradients with respect to every latent input."""
    torch.manual_seed(1)
    critic_f, critic_s = CriticNet(3, (4,)).double(), CriticNet(6, (4,)).double()

    def loss(*z: torch.Tensor) -> torch.Tensor:
      return gen_loss(critic_f, critic_s, *z, alpha=0.7).require("unified_gen")

    assert_that(input_gradcheck(loss, *latents), equal_to(True))

  def test_gp_latent_interpolation_gradients(self, latents) -> None:
    """Test the penalty's gradients with respect to critic parameters alone."""
    torch.manual_seed(2)
    critics = {
      "frame": CriticNet(3, (4,)).double(),
      "seq": CriticNet(6, (4,)).double(),
    }
    delta = torch.tensor([0.2, 0.3, 0.7, 0.8], dtype=F64)

    def loss(nets: dict[str, Net]) -> torch.Tensor:
      return gradient_penalty(nets["frame"], nets["seq"], *latents, 0.5, delta)

    assert_that(param_gradcheck(critics, loss), equal_to(True))


class TestSchedule:
  """Critic/generator update ratio."""

  def test_generator_step(self) -> None:
    """Test generator updates happen when k mod n == 0."""
    assert is_generator_step(5, 5)
    assert not is_generator_step(4, 5)
    assert is_generator_step(1, 1)

  def test_invalid_period(self) -> None:
    """Test n must be at least 1."""
    with pytest.raises(ConfigError):
      is_generator_step(1, 0)

  def test_five_to_one_ratio(self) -> None:
    """Test 100 model steps with n=5 make 20 generator updates."""
    mask = update_mask(100, 5)

    assert len(mask) == 100
    assert sum(mask) == 20
    assert mask[:5] == [False, False, False, False, True]
