"""Tests for the paired pixel environments."""

import math

import numpy as np
import pytest
from diffil.data.types import DomainTag
from diffil.envs import DotWorld, PoleWorld, make_env, rollout
from diffil.envs.corpora import expert_policy, uniform_policy
from diffil.envs.dotworld import render_dot
from diffil.envs.poleworld import DOMAINS, render_pole, wrap_angle
from diffil.errors import ConfigError
from hamcrest import assert_that, close_to, has_length


def _dot_at(x: float, domain: DomainTag) -> DotWorld:
  env = DotWorld(domain)
  env.reset(seed=0)
  env.x = x
  return env


class TestDotWorld:
  """Dynamics, evaluation reward and rendering."""

  @pytest.mark.parametrize(
    ("domain", "expected"), [(DomainTag.SOURCE, 0.55), (DomainTag.TARGET, 0.53)]
  )
  def test_step_gain(self, domain: DomainTag, expected: float) -> None:
    """Test one full-forward step moves the dot by the domain's gain."""
    env = _dot_at(0.5, domain)

    state, reward, terminated, truncated, _ = env.step(np.ones(1, np.float32))

    assert_that(float(state[0]), close_to(expected, 1e-6))
    assert_that(reward, close_to(expected - 0.5, 1e-6))
    assert not terminated
    assert not truncated

  def test_clamped_at_wall(self) -> None:
    """Test x never leaves [0, 1]."""
    env = _dot_at(0.99, DomainTag.SOURCE)

    state, *_ = env.step(np.ones(1, np.float32))

    assert float(state[0]) == 1.0

  def test_out_of_bounds_action_clamped_and_counted(self) -> None:
    """Test actions beyond [-1, 1] act as the bound and are counted."""
    env = _dot_at(0.5, DomainTag.SOURCE)

    state, *_ = env.step(np.array([3.0], np.float32))

    assert_that(float(state[0]), close_to(0.55, 1e-6))
    assert env.clamped_actions == 1

  def test_truncates_after_episode_len(self) -> None:
    """Test the H-th step truncates the episode."""
    env = DotWorld(episode_len=3)
    env.reset(seed=0)

    flags = [env.step(np.zeros(1, np.float32))[3] for _ in range(3)]

    assert flags == [False, False, True]

  @pytest.mark.parametrize(
    ("domain", "expected"), [(DomainTag.SOURCE, 2.5), (DomainTag.TARGET, 1.5)]
  )
  def test_expert_return(self, domain: DomainTag, expected: float) -> None:
    """Test the scripted expert earns gain * H over 50 steps."""
    record = rollout(DotWorld(domain), expert_policy, np.random.default_rng(0))

    assert_that(record.eval_return, close_to(expected, 1e-5))
    assert_that(record.episode.frames, has_length(51))
    assert_that(record.episode.actions, has_length(50))

  def test_random_return_near_zero(self) -> None:
    """Test the uniform policy's mean return is close to zero."""
    env = DotWorld(DomainTag.SOURCE)
    rng = np.random.default_rng(1)

    returns = [rollout(env, uniform_policy, rng).eval_return for _ in range(200)]

    assert abs(float(np.mean(returns))) < 0.06

  @pytest.mark.parametrize("domain", list(DomainTag))
  def test_rendering_injective(self, domain: DomainTag) -> None:
    """Test 50 distinct positions render 50 distinct frames."""
    frames = {render_dot(x, domain, 32).tobytes() for x in np.linspace(0, 1, 50)}

    assert_that(frames, has_length(50))

  def test_domains_look_different(self) -> None:
    """Test source and target frames differ by > 0.1 on >= 20% of pixels."""
    for x in (0.0, 0.3, 0.7, 1.0):
      source = render_dot(x, DomainTag.SOURCE, 32).astype(np.float64) / 255
      target = render_dot(x, DomainTag.TARGET, 32).astype(np.float64) / 255

      differing = (np.abs(source - target).max(axis=-1) > 0.1).mean()

      assert differing >= 0.2

  def test_render_shape(self) -> None:
    """Test frames are uint8 [S, S, 3]."""
    frame = _dot_at(0.2, DomainTag.TARGET).render()

    assert frame.shape == (32, 32, 3)
    assert frame.dtype == np.uint8


class TestPoleWorld:
  """Angle wrapping, rendering and the scripted swing-up."""

  def test_wrap_angle(self) -> None:
    """Test angles wrap into [-pi, pi)."""
    assert_that(wrap_angle(math.pi), close_to(-math.pi, 1e-12))
    assert_that(wrap_angle(1.5 * math.pi), close_to(-0.5 * math.pi, 1e-12))
    assert_that(wrap_angle(-0.25), close_to(-0.25, 1e-12))

  def test_position_error_wraps(self) -> None:
    """Test angles on either side of pi are close."""
    error = PoleWorld.position_error(math.pi - 0.1, -math.pi + 0.1)

    assert_that(error, close_to(0.2 / math.pi, 1e-9))

  def test_starts_hanging(self) -> None:
    """Test episodes start near theta = pi with low evaluation reward."""
    env = PoleWorld()
    state, _ = env.reset(seed=0)

    assert float(state[0]) < -0.99
    assert env.position_error(env.position(), math.pi) < 0.05

  def test_state_is_unit_circle(self) -> None:
    """Test cos/sin entries stay on the unit circle while stepping."""
    env = PoleWorld()
    env.reset(seed=0)
    for _ in range(20):
      state, *_ = env.step(np.ones(1, np.float32))

      assert_that(float(state[0] ** 2 + state[1] ** 2), close_to(1.0, 1e-5))

  def test_expert_beats_random(self) -> None:
    """Test the scripted swing-up outscores uniform torques."""
    rng = np.random.default_rng(0)
    env = PoleWorld(DomainTag.SOURCE)

    expert = rollout(env, expert_policy, rng).eval_return
    random = np.mean([rollout(env, uniform_policy, rng).eval_return for _ in range(5)])

    assert expert > random

  def test_domains_look_different(self) -> None:
    """Test source and target poles differ on >= 20% of pixels."""
    source = render_pole(0.3, DOMAINS[DomainTag.SOURCE], 32).astype(np.float64)
    target = render_pole(0.3, DOMAINS[DomainTag.TARGET], 32).astype(np.float64)

    differing = (np.abs(source - target).max(axis=-1) / 255 > 0.1).mean()

    assert differing >= 0.2


class TestDeterminism:
  """Seeding and simulator state."""

  @pytest.mark.parametrize("name", ["dotworld", "poleworld"])
  def test_same_seed_same_frames(self, name: str) -> None:
    """Test equal seeds and actions reproduce every frame."""

    def frames() -> list[bytes]:
      env = make_env(name, DomainTag.TARGET, 10, 16)
      env.reset(seed=7)
      rng = np.random.default_rng(3)
      out = [env.render().tobytes()]
      for _ in range(10):
        env.step(uniform_policy(env, rng))
        out.append(env.render().tobytes())
      return out

    assert frames() == frames()

  @pytest.mark.parametrize("name", ["dotworld", "poleworld"])
  def test_get_set_state(self, name: str) -> None:
    """Test restoring a saved state replays the same transition."""
    env = make_env(name, DomainTag.SOURCE, 10, 16)
    env.reset(seed=1)
    env.step(np.array([0.4], np.float32))
    saved = env.get_state()

    first = env.step(np.array([-0.2], np.float32))[0]
    env.set_state(saved)
    second = env.step(np.array([-0.2], np.float32))[0]

    np.testing.assert_array_equal(first, second)

  def test_observation_matches_step(self) -> None:
    """Test observation() returns the last stepped state."""
    env = make_env("poleworld", DomainTag.SOURCE, 10, 16)
    env.reset(seed=2)

    state, *_ = env.step(np.array([0.5], np.float32))

    np.testing.assert_array_equal(env.observation(), state)

  def test_unknown_environment(self) -> None:
    """Test an unknown name is a configuration error."""
    with pytest.raises(ConfigError):
      make_env("cartpole", DomainTag.SOURCE, 10, 16)
