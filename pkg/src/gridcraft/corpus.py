"""Snippet-caption corpus built from scripted demonstrations.

Each successful demonstration contributes several 16-frame snippets: a
window of 8-16 frames grows around a uniformly chosen center tick and is
uniformly resampled to exactly 16 frames; the caption is drawn from the
source task's paraphrase set.
"""

import base64
import json
import logging
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gridcraft.actions import encode_action
from gridcraft.constants import FRAME_SHAPE
from gridcraft.episode import TaskEnv
from gridcraft.rng import substream
from gridcraft.scripted import (
    WarmupPolicy, demonstrator_for, failure_variants, labeled_success_filter,
)
from gridcraft.text import Vocabulary
from gridcraft.world import WorldConfig

log = logging.getLogger(__name__)

SNIPPET_LEN = 16
CORPUS_FORMAT = "gridcraft.corpus"
CORPUS_VERSION = 1


@dataclass(frozen=True)
class VideoTextPair:
    snippet: np.ndarray   # float32 (16, 3, 9, 9)
    caption_ids: tuple
    caption: str
    task_id: str
    traj_id: str
    center: int


@dataclass
class ScriptedRun:
    task_id: str
    frames: np.ndarray    # float32 (T, 3, 9, 9), one per step
    actions: list
    rewards: list
    events: list          # per-step event lists
    marks: np.ndarray     # bool (T,): step shows the task behavior
    success: bool
    episode_seed: int


def run_scripted_episode(task, base_config: WorldConfig, episode_seed: int,
                         policy, rng) -> ScriptedRun:
    env = TaskEnv(task, base_config, episode_seed, compute_manual=False)
    policy.reset()
    frames, actions, rewards, events, marks = [], [], [], [], []
    while not env.done:
        action = policy.act(env.state, rng)
        res = env.step(action)
        frames.append(res.obs.frame)
        actions.append(encode_action(action))
        rewards.append(res.sparse_r)
        events.append(res.events)
        marks.append(policy.performing(env.state))
    return ScriptedRun(task_id=task.id, frames=np.stack(frames),
                       actions=actions, rewards=rewards, events=events,
                       marks=np.array(marks, dtype=bool),
                       success=env.succeeded or task.is_creative,
                       episode_seed=episode_seed)


def sample_pairs(frames: np.ndarray, phrases, vocab: Vocabulary, rng,
                 n_pairs: int, task_id: str = "", traj_id: str = "",
                 center_candidates=None) -> list:
    """Snippet/caption pairs from one trajectory; skips trajectories < 16.

    ``center_candidates`` optionally restricts window centers to the steps
    that depict the behavior (the analog of time-aligning captions to their
    video segment); centers are uniform over the whole trajectory otherwise.
    """
    t = len(frames)
    if t < SNIPPET_LEN:
        return []
    if center_candidates is not None and len(center_candidates) == 0:
        center_candidates = None
    pairs = []
    for _ in range(n_pairs):
        if t == SNIPPET_LEN:
            window = frames
            center = t // 2
        else:
            length = int(rng.integers(8, SNIPPET_LEN + 1))
            if center_candidates is None:
                center = int(rng.integers(0, t))
            else:
                center = int(center_candidates[
                    int(rng.integers(len(center_candidates)))])
            start = min(max(center - length // 2, 0), t - length)
            window = frames[start:start + length]
            idx = (np.arange(SNIPPET_LEN) * len(window)) // SNIPPET_LEN
            window = window[idx]
        phrase = phrases[int(rng.integers(len(phrases)))]
        pairs.append(VideoTextPair(
            snippet=np.ascontiguousarray(window, dtype=np.float32),
            caption_ids=tuple(vocab.encode(phrase)), caption=phrase,
            task_id=task_id, traj_id=traj_id, center=center))
    return pairs


def build_corpus(tasks, base_config: WorldConfig, n_trajectories: int,
                 seed: int, vocab: Vocabulary | None = None,
                 pairs_per_trajectory: int = 4, noise: float = 0.15,
                 max_attempt_factor: int = 3) -> tuple:
    """Run demonstrators and emit caption-paired snippets.

    Returns (pairs, vocab). Deterministic in ``seed``. A task whose
    demonstrator never succeeds within the attempt budget is skipped with a
    warning.
    """
    if vocab is None:
        vocab = Vocabulary.from_phrases([p for t in tasks for p in t.phrases])
    pairs = []
    for task in tasks:
        rng = substream(seed, f"corpus:{task.id}")
        policy = WarmupPolicy(demonstrator_for(task, noise=noise))
        collected = 0
        attempts = 0
        while collected < n_trajectories and \
                attempts < max_attempt_factor * n_trajectories:
            episode_seed = int(rng.integers(2**63))
            attempts += 1
            run = run_scripted_episode(task, base_config, episode_seed,
                                       policy, rng)
            if not run.success or len(run.frames) < SNIPPET_LEN:
                continue
            traj_id = f"{task.id}/{collected}"
            centers = np.nonzero(run.marks)[0]
            pairs.extend(sample_pairs(run.frames, task.phrases, vocab, rng,
                                      pairs_per_trajectory, task.id, traj_id,
                                      center_candidates=centers))
            collected += 1
        if collected < n_trajectories:
            log.warning("task %s: only %d/%d demonstrations succeeded%s",
                        task.id, collected, n_trajectories,
                        "; task skipped" if collected == 0 else "")
    return pairs, vocab


def generate_labeled_runs(task, base_config: WorldConfig, n_per_class: int,
                          seed: int, noise: float = 0.1) -> list:
    """Scripted labeled set for the classifier protocol: ``n_per_class``
    success runs (demonstrator) and as many failures (non-depicting
    policies), as (ScriptedRun, label) pairs. Deterministic in ``seed``."""
    rng = substream(seed, f"labeled:{task.id}")
    out = []
    # creative episodes run to the horizon, so the behavior can start at
    # once; programmatic ones need the wander prefix to reach snippet length
    success_policy = demonstrator_for(task, noise=noise)
    if not task.is_creative:
        success_policy = WarmupPolicy(success_policy)
    accept = labeled_success_filter(task)
    made = 0
    attempts = 0
    while made < n_per_class and attempts < 10 * n_per_class:
        attempts += 1
        run = run_scripted_episode(task, base_config,
                                   int(rng.integers(2**63)), success_policy, rng)
        if len(run.frames) < SNIPPET_LEN or not run.success or not accept(run):
            continue
        out.append((run, 1))
        made += 1
    if made < n_per_class:
        log.warning("task %s: only %d/%d labeled successes met the quality bar",
                    task.id, made, n_per_class)
    variants = failure_variants(task, noise=noise)
    made = 0
    while made < n_per_class:
        var_task, policy = variants[made % len(variants)]
        run = run_scripted_episode(var_task, base_config,
                                   int(rng.integers(2**63)), policy, rng)
        if len(run.frames) < SNIPPET_LEN:
            continue
        out.append((run, 0))
        made += 1
    return out


# -- corpus file -------------------------------------------------------------

def _pack_frames(arr: np.ndarray) -> str:
    return base64.b64encode(
        zlib.compress(np.ascontiguousarray(arr, dtype="<f4").tobytes())).decode()


def _unpack_frames(blob: str, shape) -> np.ndarray:
    raw = zlib.decompress(base64.b64decode(blob))
    return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def save_corpus(path, pairs, vocab: Vocabulary) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        header = {"format": CORPUS_FORMAT, "version": CORPUS_VERSION,
                  "count": len(pairs), "frame_shape": list(FRAME_SHAPE),
                  "snippet_len": SNIPPET_LEN, "vocab": vocab.words[1:]}
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for p in pairs:
            rec = {"caption": p.caption, "caption_ids": list(p.caption_ids),
                   "task": p.task_id, "traj": p.traj_id, "center": p.center,
                   "snippet": _pack_frames(p.snippet)}
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def load_corpus(path) -> tuple:
    path = Path(path)
    with open(path) as f:
        header = json.loads(f.readline())
        if header.get("format") != CORPUS_FORMAT:
            raise ValueError(f"{path} is not a corpus file")
        if header.get("version", 0) > CORPUS_VERSION:
            raise ValueError(
                f"corpus version {header['version']} is newer than "
                f"supported {CORPUS_VERSION}")
        vocab = Vocabulary(header["vocab"])
        shape = (header["snippet_len"], *header["frame_shape"])
        pairs = []
        for line in f:
            rec = json.loads(line)
            pairs.append(VideoTextPair(
                snippet=_unpack_frames(rec["snippet"], shape),
                caption_ids=tuple(rec["caption_ids"]), caption=rec["caption"],
                task_id=rec["task"], traj_id=rec["traj"],
                center=rec["center"]))
    if len(pairs) != header["count"]:
        raise ValueError(f"corpus truncated: {len(pairs)} of {header['count']} records")
    return pairs, vocab
