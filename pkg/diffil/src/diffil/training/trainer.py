"""The outer training loop.

Each iteration runs N_model critic steps (with encoder, decoder and label
updates on every n-th step), then N_RL SAC steps on rewards from the frozen
label networks, then collects `refresh_count` new learner transitions into
the learner buffer. All randomness comes from streams seeded by `config.seed`, and the
whole loop state can be saved and restored for bit-exact resumption.
"""

import time
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import torch
from torch import Tensor

from diffil.adversary import disc_loss, gen_loss, is_generator_step
from diffil.config import ExperimentConfig
from diffil.data.buffer import LearnerBuffer
from diffil.data.types import (
  DomainTag,
  Frame,
  FrameBatch,
  FrameSequence,
  ProvenanceTag,
  Transition,
  sequence_indices,
)
from diffil.envs.base import PixelEnv, State
from diffil.envs.corpora import Corpora
from diffil.envs.registry import make_env
from diffil.errors import ConfigError, DataFormatError
from diffil.labeling import (
  frame_label_loss,
  reward_from_latents,
  seq_label_loss,
  time_labels,
)
from diffil.logging import get_logger
from diffil.networks import check_finite, pixels_to_tensor
from diffil.perception import enc_dec_loss
from diffil.sac import GaussianPolicy
from diffil.training.metrics import METRICS_NAME, MetricsLog, MetricsRow
from diffil.training.model import CHECKPOINT_DIR, CONFIG_NAME, DiffilModel

logger = get_logger("training")

RUN_STATE_NAME = "run_state.pt"
RUN_STATE_FORMAT = "diffil-run-v1"

EVENT_CRITIC = "C"
EVENT_CRITIC_GENERATOR = "CG"
EVENT_RL = "R"
EVENT_COLLECT = "collect"

_REWARD_CHUNK = 1024


def evaluate_policy(
  env: PixelEnv,
  policy: GaussianPolicy,
  episodes: int,
  rng: np.random.Generator,
) -> npt.NDArray[np.float64]:
  """Ground-truth returns of the deterministic policy over whole episodes."""
  returns: list[float] = []
  for _ in range(episodes):
    state, _ = env.reset(seed=int(rng.integers(2**31)))
    total = 0.0
    done = False
    while not done:
      action = policy.act(torch.as_tensor(state)[None], deterministic=True)[0]
      state, reward, terminated, truncated, _ = env.step(action.numpy())
      total += reward
      done = terminated or truncated
    returns.append(total)
  return np.asarray(returns)


def _means(terms: list[dict[str, float]]) -> dict[str, float]:
  keys = {key for row in terms for key in row}
  return {
    key: float(np.mean([row[key] for row in terms if key in row])) for key in keys
  }


class Trainer:
  """Holds the run state and executes training iterations.

  Attributes:
      config: The validated experiment configuration.
      corpora: The three offline corpora.
      model: Every network and optimizer.
      buffer: The learner buffer.
      iteration: Completed iterations.
      events: Update events of the most recent iteration ("C", "CG", "R",
          "collect").

  Example:
      trainer = Trainer(config, corpora, run_dir=run_dir)
      trainer.train()
  """

  def __init__(
    self,
    config: ExperimentConfig,
    corpora: Corpora,
    *,
    run_dir: Path | None = None,
    prefill: bool = True,
  ) -> None:
    for provenance, ds in corpora.items().items():
      if ds.num_frames == 0:
        msg = f"static buffer {provenance} is empty"
        raise ConfigError(msg)
    self.config = config
    self.corpora = corpora
    self.run_dir = run_dir
    self.metrics = MetricsLog(run_dir / METRICS_NAME) if run_dir else None

    torch.manual_seed(config.seed)
    sample_seq, collect_seq, eval_seq = np.random.SeedSequence(config.seed).spawn(3)
    self.rng = np.random.default_rng(sample_seq)
    self.collect_rng = np.random.default_rng(collect_seq)
    self.eval_rng = np.random.default_rng(eval_seq)
    self.generator = torch.Generator().manual_seed(config.seed)

    env = config.env
    size = config.network.image_size
    self.env = make_env(env.name, DomainTag.TARGET, env.episode_len, size)
    self.eval_env = make_env(env.name, DomainTag.TARGET, env.episode_len, size)
    self.model = DiffilModel(config, self.env.state_dim, self.env.action_dim)
    self.buffer = LearnerBuffer(config.buffers.learner)

    self.iteration = 0
    self.events: list[str] = []
    self.train_returns: list[float] = []
    self._state: State | None = None
    self._episode_frames: list[npt.NDArray[np.uint8]] = []
    self._episode_return = 0.0
    self._elapsed = 0.0
    self._started = time.perf_counter()
    if prefill:
      self.prefill()

  # -- data ----------------------------------------------------------------

  def prefill(self) -> None:
    """Fill the learner buffer with `learner_prefill` random-policy transitions."""
    self.collect(self.config.schedule.learner_prefill, random_policy=True)
    logger.debug("Prefilled learner buffer with %d transitions", len(self.buffer))

  def _union_batch(
    self,
    parts: list[tuple[int, Callable[[npt.NDArray[np.int64]], FrameBatch]]],
    batch_size: int,
  ) -> FrameBatch:
    """Draw uniformly over the union of several frame stores.

    Samples are gathered per store and then shuffled, so a sample's position
    in the batch says nothing about which store it came from.
    """
    sizes = np.array([size for size, _ in parts], dtype=np.int64)
    flat = self.rng.integers(0, int(sizes.sum()), size=batch_size)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    batches: list[FrameBatch] = []
    for i, (_, gather) in enumerate(parts):
      chosen = flat[(flat >= bounds[i]) & (flat < bounds[i + 1])] - bounds[i]
      if len(chosen):
        batches.append(gather(chosen))
    joined = FrameBatch.concat(batches)
    return joined.take(self.rng.permutation(len(joined)))

  def sample_model_batch(self) -> tuple[FrameBatch, FrameBatch]:
    """Paired batches: source corpora vs. target corpus plus learner buffer."""
    batch_size = self.config.schedule.model_batch
    c = self.corpora
    source = self._union_batch(
      [
        (c.source_expert.num_frames, c.source_expert.gather),
        (c.source_random.num_frames, c.source_random.gather),
      ],
      batch_size,
    )
    target = self._union_batch(
      [
        (c.target_random.num_frames, c.target_random.gather),
        (len(self.buffer), self.buffer.frame_batch),
      ],
      batch_size,
    )
    return source, target

  # -- model training ------------------------------------------------------

  def model_step(self, k: int) -> dict[str, float]:
    """Critic update, plus generator and label updates when k mod n == 0."""
    cfg = self.config
    w = cfg.losses
    m = self.model
    feature_dim = cfg.network.feature_dim
    alpha = cfg.effective_alpha
    source, target = self.sample_model_batch()
    seq_source = pixels_to_tensor(source.seq_pixels)
    seq_target = pixels_to_tensor(target.seq_pixels)

    with torch.no_grad():
      zseq_source = m.perception.encode_sequence(seq_source)
      zseq_target = m.perception.encode_sequence(seq_target)
    disc = disc_loss(
      m.critic_frame,
      m.critic_seq,
      zseq_source[:, -feature_dim:],
      zseq_target[:, -feature_dim:],
      zseq_source,
      zseq_target,
      alpha=alpha,
      lambda_disc=w.lambda_disc,
      lambda_gp=w.lambda_gp,
      generator=self.generator,
    )
    terms = disc.scalars()
    check_finite(terms)
    m.critic_optimizer.zero_grad()
    disc.require("unified_disc").backward()
    m.critic_optimizer.step()

    if not is_generator_step(k, cfg.schedule.generator_period):
      self.events.append(EVENT_CRITIC)
      return terms
    self.events.append(EVENT_CRITIC_GENERATOR)

    zseq_source = m.perception.encode_sequence(seq_source)
    zseq_target = m.perception.encode_sequence(seq_target)
    z_source = zseq_source[:, -feature_dim:]
    z_target = zseq_target[:, -feature_dim:]
    decoders = {domain: m.perception.decoder(domain) for domain in DomainTag}
    enc_dec = enc_dec_loss(
      m.perception.encoder,
      decoders,
      seq_source[:, -1],
      seq_target[:, -1],
      lambda_recon=w.lambda_recon,
      lambda_fcon=w.lambda_fcon,
    )
    gen = gen_loss(
      m.critic_frame,
      m.critic_seq,
      z_source,
      z_target,
      zseq_source,
      zseq_target,
      alpha=alpha,
      lambda_gen=w.lambda_gen,
    )
    label_source, label_target = seq_label_loss(
      m.label_seq,
      zseq_source,
      torch.as_tensor(source.is_expert),
      zseq_target,
      lambda_source=w.lambda_label_seq_source,
      lambda_target=w.lambda_label_seq_target,
    )
    total = enc_dec.total + gen.require("unified_gen") + label_source + label_target
    step_terms: dict[str, Tensor] = {
      "recon": enc_dec.recon,
      "fcon": enc_dec.fcon,
      "seq_label_source": label_source,
      "seq_label_target": label_target,
    }
    if cfg.frame_labels_enabled:
      y = time_labels(source.t, source.episode_len, source.is_expert)
      frame = frame_label_loss(
        m.label_frame,
        z_source,
        torch.as_tensor(y, dtype=z_source.dtype),
        source.domains,
        lambda_frame=w.lambda_label_frame,
      )
      step_terms["frame_label"] = frame
      total = total + frame
    terms |= gen.scalars()
    terms |= {name: float(value.detach()) for name, value in step_terms.items()}
    check_finite(terms)

    m.perception_optimizer.zero_grad()
    m.label_optimizer.zero_grad()
    total.backward()
    m.perception_optimizer.step()
    m.label_optimizer.step()
    return terms

  # -- RL training ---------------------------------------------------------

  @torch.no_grad()
  def reward_cache(self) -> Tensor:
    """Rewards of every learner transition under the current label networks.

    The label networks are frozen for a whole RL phase and the buffer does
    not change during it, so these equal the rewards computed at sampling
    time. BatchNorm layers use their running statistics.
    """
    m = self.model
    feature_dim = self.config.network.feature_dim
    label_frame = m.label_frame if self.config.frame_labels_enabled else None
    m.label_seq.eval()
    m.label_frame.eval()
    try:
      chunks: list[Tensor] = []
      for start in range(0, len(self.buffer), _REWARD_CHUNK):
        stop = min(start + _REWARD_CHUNK, len(self.buffer))
        positions = np.arange(start, stop, dtype=np.int64)
        seqs = pixels_to_tensor(self.buffer.batch(positions).obs_seq)
        zseq = m.perception.encode_sequence(seqs)
        chunks.append(
          reward_from_latents(
            m.label_seq,
            label_frame,
            zseq,
            zseq[:, -feature_dim:],
            self.config.losses.reward_eps,
          )
        )
    finally:
      m.label_seq.train()
      m.label_frame.train()
    return torch.cat(chunks)

  def rl_phase(self) -> tuple[list[dict[str, float]], float]:
    """N_RL SAC updates on uniformly sampled learner batches."""
    rewards = self.reward_cache()
    terms: list[dict[str, float]] = []
    for _ in range(self.config.schedule.n_rl_train):
      self.events.append(EVENT_RL)
      positions = self.rng.integers(
        0, len(self.buffer), size=self.config.schedule.rl_batch
      )
      batch = self.buffer.batch(positions)
      metrics = self.model.agent.update(
        torch.as_tensor(batch.states),
        torch.as_tensor(batch.actions),
        rewards[torch.as_tensor(positions)],
        torch.as_tensor(batch.next_states),
        torch.as_tensor(batch.done),
        generator=self.generator,
      )
      row = metrics.as_dict()
      check_finite(row)
      terms.append(row)
    return terms, float(rewards.mean())

  # -- collection ----------------------------------------------------------

  def _start_episode(self) -> State:
    state, _ = self.env.reset(seed=int(self.collect_rng.integers(2**31)))
    self._state = state
    self._episode_frames = [self.env.render()]
    self._episode_return = 0.0
    return state

  def collect(self, count: int, *, random_policy: bool = False) -> int:
    """Run the learner for `count` steps and refresh the learner buffer with them.

    Returns:
        Number of evicted transitions.
    """
    seq_len = self.config.network.seq_len
    horizon = self.env.episode_len
    transitions: list[Transition] = []
    for _ in range(count):
      state = self._state if self._state is not None else self._start_episode()
      if random_policy:
        action = self.collect_rng.uniform(-1.0, 1.0, size=self.env.action_dim)
      else:
        action = self.model.agent.policy.act(
          torch.as_tensor(state)[None], generator=self.generator
        )[0].numpy()
      action = np.clip(action, -1.0, 1.0).astype(np.float32)
      next_state, reward, terminated, truncated, _ = self.env.step(action)
      self._episode_frames.append(self.env.render())
      self._episode_return += reward
      obs_seq = FrameSequence(
        tuple(
          Frame(
            pixels=self._episode_frames[i],
            t=int(i),
            episode_len=horizon,
            provenance=ProvenanceTag.TARGET_LEARNER,
          )
          for i in sequence_indices(self.env.t, seq_len)
        )
      )
      transitions.append(
        Transition(state, action, next_state, obs_seq, done=terminated)
      )
      self._state = next_state
      if terminated or truncated:
        self.train_returns.append(self._episode_return)
        self._state = None
    return self.buffer.refresh(transitions)

  # -- loop ----------------------------------------------------------------

  def evaluate(self, episodes: int | None = None) -> npt.NDArray[np.float64]:
    n = self.config.schedule.eval_episodes if episodes is None else episodes
    return evaluate_policy(self.eval_env, self.model.agent.policy, n, self.eval_rng)

  def run_iteration(self) -> MetricsRow:
    """One iteration: model phase, RL phase, collection, evaluation."""
    schedule = self.config.schedule
    self.events = []
    model_terms = [self.model_step(k) for k in range(1, schedule.n_model_train + 1)]
    rl_terms, reward_mean = self.rl_phase()
    self.events.append(EVENT_COLLECT)
    self.collect(schedule.refresh_count)
    self.iteration += 1

    returns = self.evaluate()
    row = MetricsRow(
      iteration=self.iteration,
      env_steps=self.buffer.total_inserted,
      wall_clock=self.wall_clock,
      reward_mean=reward_mean,
      eval_return_mean=float(returns.mean()),
      eval_return_std=float(returns.std()),
      critic_updates=self.events.count(EVENT_CRITIC)
      + self.events.count(EVENT_CRITIC_GENERATOR),
      generator_updates=self.events.count(EVENT_CRITIC_GENERATOR),
      clamped_actions=self.env.clamped_actions,
      **_means(model_terms + rl_terms),
    )
    if self.metrics is not None:
      self.metrics.append(row)
    logger.info(
      "iter %d | eval return %.3f +- %.3f | reward %.4f | entropy coef %.4f",
      row.iteration,
      row.eval_return_mean,
      row.eval_return_std,
      reward_mean,
      row.entropy_coef or 0.0,
    )
    return row

  def train(self, n_iter: int | None = None) -> list[MetricsRow]:
    """Run iterations until `n_iter` (default: the configured N_iter) are done."""
    target = self.config.schedule.n_iter if n_iter is None else n_iter
    every = self.config.schedule.checkpoint_every
    rows: list[MetricsRow] = []
    while self.iteration < target:
      rows.append(self.run_iteration())
      if self.run_dir is not None and (
        self.iteration % every == 0 or self.iteration == target
      ):
        self.save(self.run_dir)
    return rows

  @property
  def wall_clock(self) -> float:
    return self._elapsed + time.perf_counter() - self._started

  # -- persistence ---------------------------------------------------------

  def state_dict(self) -> dict[str, Any]:
    frames = np.stack(self._episode_frames) if self._state is not None else None
    return {
      "format": RUN_STATE_FORMAT,
      "iteration": self.iteration,
      "wall_clock": self.wall_clock,
      "model": self.model.state_dict(),
      "optimizers": {
        name: opt.state_dict() for name, opt in self.model.optimizers().items()
      },
      "rng": {
        "sample": self.rng.bit_generator.state,
        "collect": self.collect_rng.bit_generator.state,
        "eval": self.eval_rng.bit_generator.state,
      },
      "torch_generator": self.generator.get_state(),
      "torch_global": torch.get_rng_state(),
      "buffer": self.buffer.state_dict(),
      "env": self.env.get_state(),
      "eval_env": self.eval_env.get_state(),
      "episode": {
        "state": self._state,
        "frames": frames,
        "return": self._episode_return,
      },
      "train_returns": list(self.train_returns),
    }

  def load_state_dict(self, state: dict[str, Any]) -> None:
    if state.get("format") != RUN_STATE_FORMAT:
      raise DataFormatError("not a diffil run state", field="format")
    self.iteration = int(state["iteration"])
    self._elapsed = float(state["wall_clock"])
    self._started = time.perf_counter()
    self.model.load_state_dict(state["model"])
    for name, opt in self.model.optimizers().items():
      opt.load_state_dict(state["optimizers"][name])
    self.rng.bit_generator.state = state["rng"]["sample"]
    self.collect_rng.bit_generator.state = state["rng"]["collect"]
    self.eval_rng.bit_generator.state = state["rng"]["eval"]
    self.generator.set_state(state["torch_generator"])
    torch.set_rng_state(state["torch_global"])
    self.buffer.load_state_dict(state["buffer"])
    self.env.set_state(state["env"])
    self.eval_env.set_state(state["eval_env"])
    episode = state["episode"]
    self._state = episode["state"]
    frames = episode["frames"]
    self._episode_frames = [] if frames is None else list(frames)
    self._episode_return = float(episode["return"])
    self.train_returns = list(state["train_returns"])

  def save(self, run_dir: Path) -> None:
    """Write per-network checkpoints and the resumable run state."""
    run_dir.mkdir(parents=True, exist_ok=True)
    self.model.save(run_dir / CHECKPOINT_DIR)
    torch.save(self.state_dict(), run_dir / RUN_STATE_NAME)
    logger.info("Saved checkpoint at iteration %d to %s", self.iteration, run_dir)

  @classmethod
  def resume(
    cls, config: ExperimentConfig, corpora: Corpora, run_dir: Path
  ) -> "Trainer":
    """Restore a trainer from `run_dir/run_state.pt`.

    Rows the metrics log holds beyond the saved iteration are dropped.

    Raises:
        DataFormatError: If there is no run state.
    """
    path = run_dir / RUN_STATE_NAME
    if not path.is_file():
      raise DataFormatError(f"no run state in {run_dir}", field=RUN_STATE_NAME)
    trainer = cls(config, corpora, run_dir=run_dir, prefill=False)
    trainer.load_state_dict(torch.load(path, weights_only=False))
    if trainer.metrics is not None:
      trainer.metrics.truncate(trainer.iteration)
    logger.info("Resumed %s at iteration %d", run_dir, trainer.iteration)
    return trainer


def load_learner_buffer(run_dir: Path) -> LearnerBuffer:
  """The learner buffer saved with a run's most recent checkpoint.

  Raises:
      DataFormatError: If the run has no run state.
  """
  path = run_dir / RUN_STATE_NAME
  if not path.is_file():
    raise DataFormatError(f"no run state in {run_dir}", field=RUN_STATE_NAME)
  state = torch.load(path, weights_only=False)
  if state.get("format") != RUN_STATE_FORMAT:
    raise DataFormatError("not a diffil run state", field="format")
  buffer = LearnerBuffer()
  buffer.load_state_dict(state["buffer"])
  return buffer
