"""Label-network scores and rewards along whole episodes."""

import numpy as np
import numpy.typing as npt
import pandas as pd
import torch

from diffil.data.dataset import Episode
from diffil.data.types import sequence_indices
from diffil.envs.base import Action, PixelEnv
from diffil.envs.corpora import Policy
from diffil.labeling import reward
from diffil.networks import pixels_to_tensor
from diffil.sac import GaussianPolicy
from diffil.training.model import DiffilModel

TRACE_COLUMNS = ["episode", "t", "frame_score", "seq_score", "reward"]


def learner_policy(policy: GaussianPolicy) -> Policy:
  """Adapt the learner's deterministic action to the rollout interface."""

  def act(env: PixelEnv, rng: np.random.Generator) -> Action:
    state = torch.as_tensor(env.observation())[None]
    return policy.act(state, deterministic=True)[0].numpy()

  return act


@torch.no_grad()
def reward_trace(
  model: DiffilModel,
  episode: Episode,
  *,
  frame_labels: bool = True,
  eps: float = 1e-12,
) -> pd.DataFrame:
  """F_f, F_s and the reward at every timestep t >= 1 of an episode.

  The scores at t are those of the observations after the step from t-1,
  i.e. the reward the learner would receive for that transition.
  """
  seq_len = model.perception.seq_len
  feature_dim = model.perception.feature_dim
  steps = np.arange(1, len(episode), dtype=np.int64)
  if len(steps) == 0:
    raise ValueError("an episode trace needs at least two frames")
  index = np.stack([sequence_indices(int(t), seq_len) for t in steps])
  was_training = model.training
  model.eval()
  try:
    zseq = model.perception.encode_sequence(pixels_to_tensor(episode.frames[index]))
    seq_score = model.label_seq(zseq)
    frame_score = (
      model.label_frame(zseq[:, -feature_dim:])
      if frame_labels
      else torch.ones_like(seq_score)
    )
  finally:
    model.train(was_training)
  return pd.DataFrame(
    {
      "t": steps,
      "frame_score": frame_score.double().numpy(),
      "seq_score": seq_score.double().numpy(),
      "reward": reward(seq_score.double(), frame_score.double(), eps).numpy(),
    }
  )


def reward_traces(
  model: DiffilModel,
  episodes: list[Episode],
  *,
  frame_labels: bool = True,
  eps: float = 1e-12,
) -> pd.DataFrame:
  """`reward_trace` of several episodes, tagged with the episode number."""
  frames = [
    reward_trace(model, episode, frame_labels=frame_labels, eps=eps).assign(
      episode=i
    )
    for i, episode in enumerate(episodes)
  ]
  return pd.concat(frames, ignore_index=True)[TRACE_COLUMNS]


def mean_reward_by_step(traces: pd.DataFrame) -> npt.NDArray[np.float64]:
  """Average reward per timestep across episodes, indexed from t = 1."""
  return traces.groupby("t", sort=True)["reward"].mean().to_numpy()
