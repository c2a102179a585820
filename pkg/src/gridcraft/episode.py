"""Episode wrapper: applies task initialization, tracks success, horizon,
and the running-minimum distance used by manual dense rewards.

Programmatic episodes terminate on success, agent death, or horizon;
creative episodes run to the horizon (or death).
"""

import math
from dataclasses import dataclass, replace

from gridcraft.constants import ITEM_BY_NAME
from gridcraft.tasks import initial_dmin, manual_reward, success
from gridcraft.world import (
    ConfigError, WorldConfig, generate_world, observe, step,
)


def task_world_config(task, base: WorldConfig, episode_seed: int) -> WorldConfig:
    """Base world config with the task's initialization overrides applied."""
    overrides = {}
    init = task.init
    for key in ("size", "weather", "daylight", "terrain_mix"):
        if key in init:
            overrides[key] = init[key]
    if "spawn_table" in init:
        overrides["spawn_table"] = tuple((k, int(c)) for k, c in init["spawn_table"])
    unknown = set(init) - {"size", "weather", "daylight", "terrain_mix",
                           "spawn_table", "inventory"}
    if unknown:
        raise ConfigError(f"unknown init keys {sorted(unknown)}")
    return replace(base, seed=episode_seed, **overrides)


def apply_initial_inventory(state, init: dict):
    if not init.get("inventory"):
        return state
    inv = list(state.agent.inventory)
    slot = 0
    for name, count in init["inventory"].items():
        if name not in ITEM_BY_NAME:
            raise ConfigError(f"unknown init item {name!r}")
        if slot >= len(inv):
            raise ConfigError("initial inventory exceeds slot count")
        inv[slot] = (int(ITEM_BY_NAME[name]), int(count))
        slot += 1
    return replace(state, agent=replace(state.agent, inventory=tuple(inv)))


@dataclass
class StepResult:
    obs: object
    events: list
    done: bool
    success: bool          # became true this step
    manual_r: float        # dense shaping (0 when the task has none)
    sparse_r: float        # success bonus only


class TaskEnv:
    """Single-task episode runner around the pure simulator."""

    def __init__(self, task, base_config: WorldConfig, episode_seed: int,
                 success_bonus: float = 200.0, compute_manual: bool = False):
        self.task = task
        self.success_bonus = success_bonus
        self.compute_manual = compute_manual and not task.is_creative \
            and task.dense_reward is not None
        cfg = task_world_config(task, base_config, episode_seed)
        self.state = apply_initial_inventory(generate_world(cfg), task.init)
        self.obs = observe(self.state)
        self.episode_events: list = []
        self.done = False
        self.succeeded = False
        self.dmin = initial_dmin(task, self.state) if self.compute_manual else math.inf

    @property
    def tick(self) -> int:
        return self.state.tick

    def step(self, action) -> StepResult:
        if self.done:
            raise RuntimeError("episode already finished")
        prev = self.state
        self.state, self.obs, events = step(prev, action)
        self.episode_events.extend(events)

        success_now = False
        if not self.task.is_creative and not self.succeeded:
            if success(self.task, self.state, self.episode_events):
                success_now = True
                self.succeeded = True
                events = events + ["success"]

        died = self.state.agent.health <= 0
        self.done = success_now or died or self.state.tick >= self.task.horizon

        manual_r = 0.0
        if self.compute_manual:
            manual_r, self.dmin = manual_reward(
                self.task.dense_reward, prev, self.state, events, self.dmin)
        sparse_r = self.success_bonus if success_now else 0.0
        return StepResult(obs=self.obs, events=events, done=self.done,
                          success=success_now, manual_r=manual_r,
                          sparse_r=sparse_r)
