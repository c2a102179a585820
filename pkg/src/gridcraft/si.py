"""Self-imitation buffers and updates.

A trajectory is admitted if it succeeded, or if its episodic return clears
the mean-plus-delta-sigma threshold over the buffer's current contents
(population sigma). With fewer than two stored trajectories the threshold is
undefined, so any positive-return trajectory bootstraps the buffer. The SI
phase samples min(buffer sizes) trajectories per task, uniformly over
successful ones and proportionally to return over unsuccessful ones, and
maximizes log-likelihood of their actions.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F


@dataclass
class StoredTrajectory:
    task_id: str
    frame_feats: np.ndarray   # float32 (T, d), frozen-encoder features
    compass: np.ndarray       # int64 (T, 2)
    gps: np.ndarray           # float32 (T, 2)
    voxel: np.ndarray         # int64 (T, 9)
    prev_action: np.ndarray   # int64 (T,)
    actions: np.ndarray       # int64 (T,)
    episodic_return: float = 0.0
    success: bool = False

    def __len__(self) -> int:
        return len(self.actions)


class SIBuffer:
    """Per-task FIFO store with running return statistics."""

    def __init__(self, capacity: int = 1000):
        self.capacity = capacity
        self.items: deque = deque()
        self._sum = 0.0
        self._sumsq = 0.0

    def __len__(self) -> int:
        return len(self.items)

    @property
    def mean(self) -> float:
        return self._sum / len(self.items) if self.items else 0.0

    @property
    def std(self) -> float:
        """Population standard deviation of stored returns."""
        n = len(self.items)
        if n == 0:
            return 0.0
        var = max(self._sumsq / n - self.mean ** 2, 0.0)
        return math.sqrt(var)

    def recompute_stats(self) -> tuple:
        """From-scratch (mean, std) for cross-checking the running values."""
        if not self.items:
            return 0.0, 0.0
        rs = np.array([t.episodic_return for t in self.items], dtype=np.float64)
        return float(rs.mean()), float(rs.std())

    def add(self, traj: StoredTrajectory) -> None:
        self.items.append(traj)
        self._sum += traj.episodic_return
        self._sumsq += traj.episodic_return ** 2
        while len(self.items) > self.capacity:
            old = self.items.popleft()
            self._sum -= old.episodic_return
            self._sumsq -= old.episodic_return ** 2


def si_admit(buffer: SIBuffer, traj: StoredTrajectory, delta: float) -> bool:
    """Admission rule; does not insert."""
    if traj.success:
        return True
    if len(buffer) < 2:
        return traj.episodic_return > 0
    return traj.episodic_return >= buffer.mean + delta * buffer.std


def si_sample(buffers: dict, rng: np.random.Generator) -> list:
    """Prioritized draw of min(|buffer|) trajectories from each task buffer.

    Successful trajectories carry weight 1; unsuccessful ones weight
    proportional to episodic return (relative to the buffer's best return),
    so zero-return failures are never drawn. Empty input -> empty batch.
    """
    nonempty = {k: b for k, b in buffers.items() if len(b)}
    if not nonempty:
        return []
    n_sample = min(len(b) for b in nonempty.values())
    batch = []
    for task_id in sorted(nonempty):
        items = list(nonempty[task_id].items)
        best = max(t.episodic_return for t in items)
        weights = np.array(
            [1.0 if t.success else
             max(t.episodic_return, 0.0) / best if best > 0 else 0.0
             for t in items], dtype=np.float64)
        total = weights.sum()
        if total <= 0:
            continue
        idx = rng.choice(len(items), size=n_sample, replace=True,
                         p=weights / total)
        batch.extend(items[i] for i in idx)
    return batch


def si_loss(logits: torch.Tensor, actions: torch.Tensor) -> torch.Tensor:
    """Negative mean log-likelihood of the stored actions."""
    if logits.shape[0] == 0:
        raise ValueError("empty SI batch")
    return F.cross_entropy(logits, actions)
