"""Generalized advantage estimation."""

import numpy as np


def compute_gae(rewards, values, bootstrap_value: float, gamma: float,
                lam: float):
    """Standard GAE recursion over one trajectory segment.

    ``bootstrap_value`` is the value of the state after the last step (0 for
    terminal states). Returns (advantages, returns) with
    returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.size == 0:
        raise ValueError("empty reward sequence")
    if rewards.shape != values.shape:
        raise ValueError("rewards and values must have equal length")
    t = rewards.size
    adv = np.empty(t, dtype=np.float64)
    next_value = float(bootstrap_value)
    acc = 0.0
    for i in range(t - 1, -1, -1):
        delta = rewards[i] + gamma * next_value - values[i]
        acc = delta + gamma * lam * acc
        adv[i] = acc
        next_value = values[i]
    return adv, adv + values
