"""Frozen reward model -> per-step dense reward.

Text embeddings for the goal and its negative prompts are computed once; a
ring buffer caches the last 16 frame features so each simulator step costs a
single frame-encoder evaluation. P_G is the softmax probability of the goal
prompt against the whole prompt set, turned into a reward by one of three
formulations: DIRECT clamps the margin over the 1/N_T random baseline at
zero, DIRECT_NAIVE uses the raw probability, DELTA pays the per-step change.
"""

from enum import Enum

import numpy as np
import torch

from gridcraft.reward_model import N_FRAMES, RewardModel
from gridcraft.text import Vocabulary, pad_batch


class RewardVariant(Enum):
    DIRECT = "direct"
    DIRECT_NAIVE = "direct_naive"
    DELTA = "delta"


class PromptSet:
    """Goal prompt plus negatives with precomputed text embeddings."""

    def __init__(self, prompts, embeddings: torch.Tensor, goal_index: int = 0):
        if len(prompts) < 2:
            raise ValueError("a prompt set needs the goal and at least one negative")
        if len(set(prompts)) != len(prompts):
            raise ValueError("duplicate prompts in prompt set")
        self.prompts = tuple(prompts)
        self.embeddings = embeddings  # (N_T, d)
        self.goal_index = goal_index

    @property
    def n_prompts(self) -> int:
        return len(self.prompts)


def precompute_prompts(model: RewardModel, vocab: Vocabulary, prompts,
                       goal_index: int = 0) -> PromptSet:
    ids, mask = pad_batch([vocab.encode(p) for p in prompts])
    with torch.no_grad():
        emb = model.encode_text(torch.from_numpy(ids),
                                torch.from_numpy(mask))
    return PromptSet(prompts, emb, goal_index)


class FeatureCache:
    """Ring buffer of the last 16 frame features with their tick indices."""

    def __init__(self, dim: int, dtype=torch.float32):
        self.feats = torch.zeros(N_FRAMES, dim, dtype=dtype)
        self.ticks = np.full(N_FRAMES, -1, dtype=np.int64)
        self.count = 0
        self._head = 0  # next write position

    @property
    def full(self) -> bool:
        return self.count >= N_FRAMES

    def last_tick(self) -> int:
        return int(self.ticks[(self._head - 1) % N_FRAMES]) if self.count else -1

    def push(self, feature: torch.Tensor, tick: int) -> None:
        if self.count and tick != self.last_tick() + 1:
            raise ValueError(
                f"non-consecutive tick {tick} after {self.last_tick()}; "
                "reset the cache at episode boundaries")
        self.feats[self._head] = feature
        self.ticks[self._head] = tick
        self._head = (self._head + 1) % N_FRAMES
        self.count += 1

    def window(self) -> torch.Tensor:
        """(16, d) features ordered oldest to newest; requires a full cache."""
        if not self.full:
            raise ValueError(f"cache holds {self.count} < {N_FRAMES} features")
        idx = (self._head + np.arange(N_FRAMES)) % N_FRAMES
        return self.feats[idx]

    def reset(self) -> None:
        self.count = 0
        self._head = 0
        self.ticks[:] = -1


def push_frame(cache: FeatureCache, frame, model: RewardModel, tick: int) -> None:
    """Encode exactly one frame and append its feature."""
    if not isinstance(frame, torch.Tensor):
        frame = torch.from_numpy(np.asarray(frame))
    dtype = model.frame_mlp[0].weight.dtype
    with torch.no_grad():
        feat = model.encode_frames(frame.to(dtype).unsqueeze(0))[0]
    cache.push(feat, tick)


def compute_probability(model: RewardModel, cache: FeatureCache,
                        prompt_set: PromptSet) -> float:
    """Softmax probability of the goal prompt for the cached window.

    The softmax itself runs in float64 so the prompt-set probabilities sum
    to 1 within 1e-9 regardless of the model dtype.
    """
    with torch.no_grad():
        video = model.aggregate(cache.window().unsqueeze(0))[0]
        scores = model.score(prompt_set.embeddings, video.unsqueeze(0).expand_as(
            prompt_set.embeddings))
        probs = torch.softmax(scores.double(), dim=0)
    return float(probs[prompt_set.goal_index])


def reward(p_cur: float, p_prev, n_prompts: int, variant: RewardVariant) -> float:
    """One reward value from consecutive goal probabilities.

    ``p_prev`` is None on the first full window of an episode, which defines
    the DELTA reward there as 0.
    """
    if variant == RewardVariant.DIRECT:
        return max(p_cur - 1.0 / n_prompts, 0.0)
    if variant == RewardVariant.DIRECT_NAIVE:
        return p_cur
    if variant == RewardVariant.DELTA:
        return 0.0 if p_prev is None else p_cur - p_prev
    raise ValueError(f"unknown variant {variant!r}")


class RewardAdapter:
    """Per-episode stateful wrapper: push a frame, get the step reward.

    Steps before the window fills produce reward 0 and no probability;
    frames are never zero-padded.
    """

    def __init__(self, model: RewardModel, prompt_set: PromptSet,
                 variant: RewardVariant):
        self.model = model
        self.prompt_set = prompt_set
        self.variant = variant
        dim = model.cfg.embed_dim
        dtype = model.frame_mlp[0].weight.dtype
        self.cache = FeatureCache(dim, dtype=dtype)
        self.p_prev = None

    def reset(self) -> None:
        self.cache.reset()
        self.p_prev = None

    def push_feature(self, feature: torch.Tensor, tick: int) -> None:
        self.cache.push(feature, tick)

    def push_frame(self, frame, tick: int) -> None:
        push_frame(self.cache, frame, self.model, tick)

    def step_reward(self) -> tuple:
        """(reward, P_G or None) for the current window state."""
        if not self.cache.full:
            return 0.0, None
        p = compute_probability(self.model, self.cache, self.prompt_set)
        r = reward(p, self.p_prev, self.prompt_set.n_prompts, self.variant)
        self.p_prev = p
        return r, p
