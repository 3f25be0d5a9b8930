"""Tests for the encoder, decoders and their losses."""

import math

import pytest
import torch
from diffil.data.types import DomainTag
from diffil.networks import Net, num_parameters
from diffil.perception import (
  Decoder,
  Encoder,
  Perception,
  enc_dec_loss,
  feature_consistency,
  mean_l2,
)
from diffil_testing import miniature_network_config, param_gradcheck
from hamcrest import assert_that, close_to, equal_to


@pytest.fixture
def perception() -> Perception:
  torch.manual_seed(0)
  return Perception(miniature_network_config()).double()


def _images(batch: int, seed: int) -> torch.Tensor:
  generator = torch.Generator().manual_seed(seed)
  return torch.rand(batch, 4, 4, 3, generator=generator, dtype=torch.float64)


class TestShapes:
  """Input and output shapes."""

  def test_encoder_output(self) -> None:
    """Test [B, H, W, 3] images map to [B, F] features."""
    encoder = Encoder(8, (4, 4), (1, 2), feature_dim=5)

    assert encoder(torch.rand(3, 8, 8, 3)).shape == (3, 5)

  def test_encoder_rejects_wrong_size(self) -> None:
    """Test images of another size are refused."""
    encoder = Encoder(8, (4, 4), (1, 2), feature_dim=5)

    with pytest.raises(ValueError):
      encoder(torch.rand(3, 16, 16, 3))

  def test_decoder_output(self) -> None:
    """Test features decode to channels-last images."""
    decoder = Decoder(8, (4, 4), (1, 2), feature_dim=5)

    assert decoder(torch.rand(3, 5)).shape == (3, 8, 8, 3)

  def test_even_kernel_rejected(self) -> None:
    """Test same-padding needs an odd kernel."""
    with pytest.raises(ValueError):
      Encoder(8, (4,), (1,), feature_dim=5, kernel_size=4)

  def test_default_architecture(self) -> None:
    """Test the default stack accepts 32x32 frames."""
    encoder = Encoder(32, (16, 16, 32, 32, 64, 64), (1, 2, 1, 2, 1, 2), 32)

    assert encoder(torch.rand(2, 32, 32, 3)).shape == (2, 32)

  def test_encode_sequence_concatenates_frames(self, perception: Perception) -> None:
    """Test sequence latents are per-frame latents in time order."""
    seqs = _images(6, 1).reshape(3, 2, 4, 4, 3)

    zseq = perception.encode_sequence(seqs)

    assert zseq.shape == (3, 6)
    torch.testing.assert_close(zseq[:, 3:], perception.encode(seqs[:, 1]))
    torch.testing.assert_close(zseq[:, :3], perception.encode(seqs[:, 0]))

  def test_unknown_domain(self, perception: Perception) -> None:
    """Test asking for a decoder of an unknown domain fails."""
    with pytest.raises(ValueError):
      perception.decoder("middle")

  def test_miniature_network_is_small(self, perception: Perception) -> None:
    """Test the oracle network stays within 200 parameters."""
    assert num_parameters(perception) <= 200


class TestLossValues:
  """Closed-form loss values."""

  def test_mean_l2(self) -> None:
    """Test the per-sample norm of a constant difference."""
    difference = torch.ones(2, 3, 4, dtype=torch.float64)

    assert_that(float(mean_l2(difference)), close_to(math.sqrt(12), 1e-12))

  def test_feature_consistency_stops_gradient_to_target(self) -> None:
    """Test no gradient reaches the stopped feature target."""
    z = torch.tensor([[3.0, 4.0]], dtype=torch.float64, requires_grad=True)
    z_cycled = torch.zeros(1, 2, dtype=torch.float64, requires_grad=True)

    loss = feature_consistency(z, z_cycled)
    loss.backward()

    assert_that(float(loss), close_to(5.0, 1e-12))
    assert z.grad is None
    assert z_cycled.grad is not None

  def test_empty_batch_rejected(self, perception: Perception) -> None:
    """Test both domains must contribute frames."""
    decoders = {d: perception.decoder(d) for d in DomainTag}

    with pytest.raises(ValueError):
      enc_dec_loss(perception.encoder, decoders, _images(2, 0), _images(0, 0))

  def test_total_weights_terms(self, perception: Perception) -> None:
    """Test total = lambda_recon * recon + lambda_fcon * fcon."""
    decoders = {d: perception.decoder(d) for d in DomainTag}

    terms = enc_dec_loss(
      perception.encoder,
      decoders,
      _images(2, 0),
      _images(3, 1),
      lambda_recon=0.5,
      lambda_fcon=2.0,
    )

    expected = 0.5 * float(terms.recon) + 2.0 * float(terms.fcon)
    assert_that(float(terms.total), close_to(expected, 1e-12))


class TestGradientOracle:
  """Analytic gradients against central finite differences."""

  def test_enc_dec_loss_parameter_gradients(self, perception: Perception) -> None:
    """Test reconstruction + consistency gradients for p, q^S and q^T."""
    source, target = _images(2, 2), _images(2, 3)
    modules = {
      "encoder": perception.encoder,
      "source": perception.decoder(DomainTag.SOURCE),
      "target": perception.decoder(DomainTag.TARGET),
    }

    def loss(nets: dict[str, Net]) -> torch.Tensor:
      decoders = {DomainTag.SOURCE: nets["source"], DomainTag.TARGET: nets["target"]}
      return enc_dec_loss(nets["encoder"], decoders, source, target).total

    assert_that(param_gradcheck(modules, loss), equal_to(True))
