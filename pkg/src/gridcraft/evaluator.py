"""Evaluation protocol: greedy success-rate reports over seeds, the
reward-model-as-classifier pipeline for creative tasks, exact 1-D 2-means
thresholding, F1 agreement, and retrieval checks."""

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from gridcraft.actions import decode_action
from gridcraft.episode import TaskEnv
from gridcraft.policy import PREV_ACTION_NONE, PolicyConfig, PolicyNet
from gridcraft.reward_adapter import PromptSet
from gridcraft.reward_model import N_FRAMES, RewardModel
from gridcraft.rng import substream
from gridcraft.text import pad_batch
from gridcraft.world import ConfigError, WorldConfig


# -- trajectory scoring and classification ----------------------------------

def score_trajectory(model: RewardModel, frames: np.ndarray,
                     prompt_set: PromptSet) -> float:
    """Mean goal probability over all full 16-frame windows of a trajectory."""
    t = len(frames)
    if t < N_FRAMES:
        raise ValueError(f"trajectory has {t} < {N_FRAMES} frames")
    dtype = model.frame_mlp[0].weight.dtype
    with torch.no_grad():
        feats = model.encode_frames(torch.from_numpy(frames).to(dtype))
        windows = feats.unfold(0, N_FRAMES, 1).permute(0, 2, 1)
        videos = model.aggregate(windows)
        logits = model.scale() * videos @ prompt_set.embeddings.T
        probs = torch.softmax(logits, dim=1)[:, prompt_set.goal_index]
    return float(probs.mean())


def kmeans2_threshold(scores) -> float:
    """Exact 1-D 2-means decision boundary: the optimal cluster split of the
    sorted scores, with the boundary at the midpoint of the two means."""
    xs = np.sort(np.asarray(scores, dtype=np.float64))
    n = xs.size
    if n < 2 or xs[0] == xs[-1]:
        raise ValueError("need at least 2 distinct scores")
    prefix = np.concatenate([[0.0], np.cumsum(xs)])
    prefix_sq = np.concatenate([[0.0], np.cumsum(xs * xs)])

    def sse(i, j):  # within-cluster sum of squares for xs[i:j]
        m = j - i
        s = prefix[j] - prefix[i]
        sq = prefix_sq[j] - prefix_sq[i]
        return sq - s * s / m

    best_k, best_cost = 1, math.inf
    for k in range(1, n):
        cost = sse(0, k) + sse(k, n)
        if cost < best_cost - 1e-15:
            best_cost, best_k = cost, k
    left_mean = prefix[best_k] / best_k
    right_mean = (prefix[n] - prefix[best_k]) / (n - best_k)
    return 0.5 * (left_mean + right_mean)


@dataclass
class ClassifierResult:
    threshold: float
    scores: list
    predictions: list
    f1: float
    precision: float
    recall: float


def classify_and_f1(scores, threshold: float, labels) -> ClassifierResult:
    """Predict success where score strictly exceeds the boundary; F1 against
    the provided ground truth (0 when precision + recall is 0)."""
    scores = list(map(float, scores))
    labels = list(map(int, labels))
    if len(scores) != len(labels):
        raise ValueError("scores and labels differ in length")
    preds = [1 if s > threshold else 0 for s in scores]
    tp = sum(1 for p, y in zip(preds, labels) if p == 1 and y == 1)
    fp = sum(1 for p, y in zip(preds, labels) if p == 1 and y == 0)
    fn = sum(1 for p, y in zip(preds, labels) if p == 0 and y == 1)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return ClassifierResult(threshold=threshold, scores=scores,
                            predictions=preds, f1=f1, precision=precision,
                            recall=recall)


def retrieval_r_at_1(model: RewardModel, pairs, vocab, rng,
                     candidates: int = 16, trials: int = 200) -> float:
    """Text-to-video retrieval: fraction of trials where the matched video
    scores highest for its caption among the candidate set.

    Candidates come from distinct tasks (one video each) so the 15
    non-matches are true distractors; chance level is 1/candidates.
    """
    by_task: dict = {}
    for i, p in enumerate(pairs):
        by_task.setdefault(p.task_id, []).append(i)
    task_ids = sorted(by_task)
    if len(task_ids) < candidates:
        raise ValueError(
            f"need pairs from >= {candidates} tasks, have {len(task_ids)}")
    dtype = model.frame_mlp[0].weight.dtype
    snippets = torch.from_numpy(np.stack([p.snippet for p in pairs])).to(dtype)
    with torch.no_grad():
        videos = model.encode_video(snippets)
        ids, mask = pad_batch([list(p.caption_ids) for p in pairs])
        texts = model.encode_text(torch.from_numpy(ids), torch.from_numpy(mask))
    hits = 0
    for _ in range(trials):
        chosen_tasks = rng.choice(len(task_ids), size=candidates, replace=False)
        idx = np.array([by_task[task_ids[t]][int(rng.integers(
            len(by_task[task_ids[t]])))] for t in chosen_tasks])
        sims = texts[idx[0]] @ videos[idx].T
        if int(sims.argmax()) == 0:
            hits += 1
    return hits / trials


# -- success-rate evaluation --------------------------------------------------

@dataclass
class EvalReport:
    task_id: str
    seeds: list
    episodes_per_seed: int
    per_seed_success: list        # percentage per seed
    mean: float                   # percentage
    std: float                    # population std over seeds, percentage
    held_out: bool
    config_hash: str
    episodes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "task": self.task_id, "seeds": self.seeds,
            "episodes_per_seed": self.episodes_per_seed,
            "per_seed_success": self.per_seed_success,
            "mean": self.mean, "std": self.std, "held_out": self.held_out,
            "config_hash": self.config_hash, "episodes": self.episodes,
        }


class PolicyRunner:
    """Greedy (or sampled) action selection for a trained policy."""

    def __init__(self, policy: PolicyNet, reward_model: RewardModel,
                 prompt_emb: torch.Tensor, stochastic: bool = False):
        self.policy = policy
        self.reward_model = reward_model
        self.prompt_emb = prompt_emb
        self.stochastic = stochastic

    def act(self, obs, prev_action: int, rng) -> int:
        with torch.no_grad():
            feat = self.reward_model.encode_frames(
                torch.from_numpy(obs.frame[None, None]))[0]
            logits, _ = self.policy(
                feat, self.prompt_emb.unsqueeze(0),
                torch.from_numpy(obs.compass[None]).long(),
                torch.from_numpy(obs.gps[None]),
                torch.from_numpy(obs.voxel.reshape(1, 9)).long(),
                torch.tensor([prev_action], dtype=torch.long))
        if self.stochastic:
            p = torch.softmax(logits[0].double(), dim=-1).numpy()
            return int(rng.choice(len(p), p=p / p.sum()))
        return int(logits[0].argmax())


def run_eval(policy: PolicyNet, reward_model: RewardModel, prompt_emb,
             task, base_world: WorldConfig, n_episodes: int, seeds,
             config_overrides: dict | None = None, stochastic: bool = False,
             classifier=None, config_hash: str = "",
             success_bonus: float = 200.0) -> EvalReport:
    """Success-rate protocol: for each seed run ``n_episodes`` greedy
    episodes; success comes from the task predicate, or from the classifier
    (score > threshold) for creative tasks."""
    overrides = dict(config_overrides or {})
    if task.is_creative and classifier is None:
        raise ConfigError(
            f"creative task {task.id} needs a score classifier for evaluation")
    import dataclasses
    world = dataclasses.replace(base_world, **overrides) if overrides else base_world

    runner = PolicyRunner(policy, reward_model, prompt_emb, stochastic)
    per_seed = []
    episode_records = []
    for seed in seeds:
        rng = substream(seed, f"eval:{task.id}")
        wins = 0
        for ep in range(n_episodes):
            episode_seed = int(rng.integers(2**63))
            env = TaskEnv(task, world, episode_seed, success_bonus=success_bonus)
            prev = PREV_ACTION_NONE
            frames = [env.obs.frame]
            ret = 0.0
            while not env.done:
                a = runner.act(env.obs, prev, rng)
                res = env.step(decode_action(a))
                frames.append(res.obs.frame)
                ret += res.sparse_r
                prev = a
            if task.is_creative:
                score = score_trajectory(reward_model, np.stack(frames),
                                         classifier.prompt_set)
                ok = score > classifier.threshold
            else:
                ok = env.succeeded
            wins += bool(ok)
            episode_records.append({"seed": seed, "episode": ep,
                                    "success": bool(ok),
                                    "ticks": env.state.tick})
        per_seed.append(100.0 * wins / n_episodes)
    arr = np.array(per_seed, dtype=np.float64)
    return EvalReport(
        task_id=task.id, seeds=list(seeds), episodes_per_seed=n_episodes,
        per_seed_success=per_seed, mean=float(arr.mean()),
        std=float(arr.std()), held_out=bool(overrides),
        config_hash=config_hash, episodes=episode_records)


@dataclass
class ScoreClassifier:
    prompt_set: PromptSet
    threshold: float
