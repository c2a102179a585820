"""Task formalism: programmatic 5-tuples, creative 3-tuples, templates,
and manual dense rewards.

A programmatic task carries an executable success predicate over simulator
state; a creative task has only a goal, guidance, and initialization, and is
judged by the learned reward model. Dense-reward shaping pays for valid
attacks, for new minimum geodesic distance to the target entity kind, and
for the terminal success event.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field

from gridcraft.constants import ENTITY_NAMES, ITEM_BY_NAME, EntityKind
from gridcraft.world import ConfigError, WorldState, geodesic_distance_to_kind

log = logging.getLogger(__name__)

CATEGORIES = ("survival", "harvest", "tech_tree", "combat")


@dataclass(frozen=True)
class DenseRewardSpec:
    target_kind: str
    lam_nav: float = 0.0
    lam_attack: float = 0.0
    lam_success: float = 0.0
    reset_dmin_on_hit: bool = False

    def __post_init__(self):
        if min(self.lam_nav, self.lam_attack, self.lam_success) < 0:
            raise ConfigError("reward weights must be nonnegative")
        if max(self.lam_nav, self.lam_attack, self.lam_success) <= 0:
            raise ConfigError("at least one reward weight must be positive")
        if self.target_kind not in ENTITY_NAMES:
            raise ConfigError(f"unknown target kind {self.target_kind!r}")


@dataclass(frozen=True)
class ProgrammaticTask:
    id: str
    category: str
    goal: str
    guidance: str
    init: dict
    success_fn: str
    dense_reward: DenseRewardSpec | None = None
    horizon: int = 500
    group: str = ""
    phrases: tuple = ()  # caption paraphrases; first entry equals the goal

    @property
    def is_creative(self) -> bool:
        return False


@dataclass(frozen=True)
class CreativeTask:
    id: str
    category: str
    goal: str
    guidance: str
    init: dict
    horizon: int = 250
    group: str = "creative"
    phrases: tuple = ()

    @property
    def is_creative(self) -> bool:
        return True


@dataclass(frozen=True)
class TaskTemplate:
    """Goal pattern expanded over target x initial-inventory x world-condition."""
    category: str
    id_pattern: str
    goal_pattern: str
    success_pattern: str
    targets: tuple
    inits: tuple       # of (name, init dict)
    conditions: tuple  # of (name, overrides dict)
    reject: object = None  # callable(target, init_name, cond_name) -> bool


def expand_templates(templates) -> list:
    """Filtered Cartesian product, lexicographic over (target, init, condition)."""
    tasks = []
    for tpl in templates:
        for target, (iname, init), (cname, cond) in itertools.product(
                tpl.targets, tpl.inits, tpl.conditions):
            if tpl.reject is not None and tpl.reject(target, iname, cname):
                continue
            merged = dict(init)
            merged.update(cond)
            tasks.append(ProgrammaticTask(
                id=tpl.id_pattern.format(target=target, init=iname, cond=cname),
                category=tpl.category,
                goal=tpl.goal_pattern.format(target=target, init=iname, cond=cname),
                guidance="",
                init=merged,
                success_fn=tpl.success_pattern.format(target=target),
            ))
    if not tasks:
        log.warning("template expansion produced no tasks")
    return tasks


def success(task: ProgrammaticTask, state: WorldState, events) -> bool:
    """Evaluate the task's success predicate; pure in (state, events)."""
    parts = task.success_fn.split(":")
    if parts[0] == "inventory_at_least":
        item = ITEM_BY_NAME.get(parts[1])
        if item is None or len(parts) != 3:
            raise ConfigError(f"bad success_fn {task.success_fn!r}")
        need = int(parts[2])
        have = sum(c for kind, c in state.agent.inventory
                   if kind == int(item) and c > 0)
        return have >= need
    if parts[0] == "hunted":
        if len(parts) != 2 or parts[1] not in ENTITY_NAMES:
            raise ConfigError(f"bad success_fn {task.success_fn!r}")
        return f"hunted:{parts[1]}" in events
    if parts[0] == "survive":
        return state.tick >= int(parts[1]) and state.agent.health > 0
    raise ConfigError(f"unknown success_fn {task.success_fn!r}")


def manual_reward(spec: DenseRewardSpec, prev: WorldState, cur: WorldState,
                  events, dmin: float):
    """Dense shaping for one step. Returns (reward, new running-min distance).

    reward = lam_attack * [valid attack on target]
           + lam_nav * max(dmin - d_cur, 0)
           + lam_success * [success event];
    the navigation term pays once per unit of new minimum geodesic distance,
    and optionally resets the running minimum on a valid hit so chasing a
    fleeing target keeps paying.
    """
    kind = EntityKind(ENTITY_NAMES.index(spec.target_kind))
    d_cur = geodesic_distance_to_kind(cur, kind)
    hit = f"valid_attack:{spec.target_kind}" in events

    reward = 0.0
    if hit:
        reward += spec.lam_attack
    if "success" in events:
        reward += spec.lam_success
    if math.isfinite(d_cur) and math.isfinite(dmin):
        reward += spec.lam_nav * max(dmin - d_cur, 0.0)

    if math.isfinite(d_cur):
        new_dmin = d_cur if (hit and spec.reset_dmin_on_hit) else min(dmin, d_cur)
    else:
        new_dmin = dmin
    return reward, new_dmin


def initial_dmin(task: ProgrammaticTask, state: WorldState) -> float:
    if task.dense_reward is None:
        return math.inf
    kind = EntityKind(ENTITY_NAMES.index(task.dense_reward.target_kind))
    return geodesic_distance_to_kind(state, kind)


# --------------------------------------------------------------------------
# Starter suite: 16 programmatic tasks (4 per category) + 8 creative tasks.
# --------------------------------------------------------------------------

_ANIMAL_SPAWNS = (("cow", 3), ("sheep", 3), ("pig", 1))


def _p(id, category, goal, guidance, init, success_fn, phrases, group,
       dense=None, horizon=500):
    return ProgrammaticTask(id=id, category=category, goal=goal,
                            guidance=guidance, init=init, success_fn=success_fn,
                            dense_reward=dense, horizon=horizon, group=group,
                            phrases=tuple(phrases))


def _c(id, goal, guidance, init, phrases, horizon=250):
    return CreativeTask(id=id, category="creative", goal=goal, guidance=guidance,
                        init=init, horizon=horizon, phrases=tuple(phrases))


def starter_tasks() -> list:
    """The fixed desk-scale task suite, in a stable order."""
    tasks = [
        # -- harvest --
        _p("harvest_milk", "harvest", "milk a cow",
           "Find a cow, stand next to it facing it, and use the empty bucket.",
           {"inventory": {"bucket": 1}, "spawn_table": _ANIMAL_SPAWNS},
           "inventory_at_least:milk:1",
           ["milk a cow", "collect milk from a cow", "get a bucket of milk",
            "obtain milk", "fill the bucket with milk"],
           "animal_zoo",
           dense=DenseRewardSpec("cow", lam_nav=10.0, lam_success=200.0)),
        _p("harvest_wool", "harvest", "shear a sheep",
           "Find a sheep, stand next to it facing it, and use the shears.",
           {"inventory": {"shears": 1}, "spawn_table": _ANIMAL_SPAWNS},
           "inventory_at_least:wool:1",
           ["shear a sheep", "collect wool from a sheep", "harvest wool",
            "cut wool off a sheep", "get wool"],
           "animal_zoo",
           dense=DenseRewardSpec("sheep", lam_nav=10.0, lam_success=200.0)),
        _p("harvest_wood", "harvest", "chop a tree and collect wood",
           "Walk to a tree tile, face it, and attack to harvest wood.",
           {}, "inventory_at_least:wood:1",
           ["chop a tree and collect wood", "gather wood from a tree",
            "collect wood", "chop wood", "harvest a tree"],
           "resource"),
        _p("harvest_stone", "harvest", "mine a stone block",
           "Walk to stone, face it, and attack while holding a pickaxe.",
           {"inventory": {"wooden_pickaxe": 1}}, "inventory_at_least:stone_block:1",
           ["mine a stone block", "mine stone with a pickaxe", "collect stone",
            "dig up some stone", "quarry a stone block"],
           "resource"),
        # -- combat --
        _p("combat_cow", "combat", "hunt a cow",
           "Chase the cow and attack it with your sword until it drops.",
           {"inventory": {"stone_sword": 1}, "spawn_table": _ANIMAL_SPAWNS},
           "hunted:cow",
           ["hunt a cow", "kill a cow with a sword", "slay a cow",
            "take down a cow", "hunt down the cow"],
           "animal_zoo",
           dense=DenseRewardSpec("cow", lam_nav=1.0, lam_attack=5.0,
                                 lam_success=200.0, reset_dmin_on_hit=True)),
        _p("combat_sheep", "combat", "hunt a sheep",
           "Chase the sheep and attack it with your sword until it drops.",
           {"inventory": {"stone_sword": 1}, "spawn_table": _ANIMAL_SPAWNS},
           "hunted:sheep",
           ["hunt a sheep", "kill a sheep with a sword", "slay a sheep",
            "take down a sheep", "hunt down the sheep"],
           "animal_zoo",
           dense=DenseRewardSpec("sheep", lam_nav=1.0, lam_attack=5.0,
                                 lam_success=200.0, reset_dmin_on_hit=True)),
        _p("combat_zombie", "combat", "combat a zombie",
           "Face the zombie and keep attacking with your sword; retreat if hurt.",
           {"inventory": {"stone_sword": 1}, "spawn_table": (("zombie", 2),)},
           "hunted:zombie",
           ["combat a zombie", "fight a zombie", "defeat a zombie",
            "slay the zombie", "kill a zombie"],
           "mob_combat",
           dense=DenseRewardSpec("zombie", lam_attack=5.0, lam_success=200.0)),
        _p("combat_spider", "combat", "combat a spider",
           "Face the spider and keep attacking with your sword; retreat if hurt.",
           {"inventory": {"stone_sword": 1}, "spawn_table": (("spider", 2),)},
           "hunted:spider",
           ["combat a spider", "fight a spider", "defeat a spider",
            "slay the spider", "kill a spider"],
           "mob_combat",
           dense=DenseRewardSpec("spider", lam_attack=5.0, lam_success=200.0)),
        # -- tech tree --
        _p("tech_plank", "tech_tree", "craft planks from wood",
           "Chop a tree for wood, then craft planks (recipe 0).",
           {}, "inventory_at_least:plank:1",
           ["craft planks from wood", "make wooden planks", "craft planks",
            "turn wood into planks"],
           "resource"),
        _p("tech_stick", "tech_tree", "craft sticks",
           "Craft planks from wood, then sticks from planks (recipe 1).",
           {}, "inventory_at_least:stick:1",
           ["craft sticks", "make some sticks", "craft sticks from planks",
            "produce sticks"],
           "resource"),
        _p("tech_wooden_sword", "tech_tree", "find material and craft a wooden sword",
           "Gather wood, craft planks and sticks, then the sword (recipe 2).",
           {}, "inventory_at_least:wooden_sword:1",
           ["find material and craft a wooden sword", "craft a wooden sword",
            "make a wooden sword from scratch", "build a wooden sword"],
           "resource"),
        _p("tech_stone_pickaxe", "tech_tree", "craft a stone pickaxe",
           "Mine stone with the wooden pickaxe, gather wood, then recipe 4.",
           {"inventory": {"wooden_pickaxe": 1}}, "inventory_at_least:stone_pickaxe:1",
           ["craft a stone pickaxe", "make a stone pickaxe",
            "upgrade to a stone pickaxe", "forge a stone pickaxe"],
           "resource"),
        # -- survival --
        _p("survive_plain", "survival", "survive for a hundred ticks",
           "Stay alive: avoid monsters and keep your health up.",
           {"spawn_table": (("zombie", 1),)}, "survive:100",
           ["survive for a hundred ticks", "stay alive", "survive",
            "survive in the wild"],
           "survival", horizon=1000),
        _p("survive_armed", "survival", "survive given a sword and some food",
           "Eat when hungry, fight off monsters with the sword.",
           {"inventory": {"stone_sword": 1, "meat": 3},
            "spawn_table": (("zombie", 2), ("spider", 1))},
           "survive:200",
           ["survive given a sword and some food", "survive with sword and food",
            "stay alive with your sword", "survive the monsters"],
           "survival", horizon=1000),
        _p("survive_night", "survival", "survive the night",
           "Keep away from the zombies until morning.",
           {"daylight": "night", "spawn_table": (("zombie", 3),)},
           "survive:150",
           ["survive the night", "stay alive at night", "make it through the night",
            "survive until morning"],
           "survival", horizon=1000),
        _p("survive_swarm", "survival", "survive unarmed among monsters",
           "Run from the monsters; distance is your armor.",
           {"spawn_table": (("zombie", 1), ("spider", 1))},
           "survive:150",
           ["survive unarmed among monsters", "survive barehanded",
            "stay alive without weapons", "evade the monsters and survive"],
           "survival", horizon=1000),
        # -- creative --
        # navigation targets use rarer terrain so the goal is a distinct,
        # localized structure rather than scenery that is everywhere
        _c("creative_find_water", "find water",
           "Walk until you reach the water's edge.",
           {"terrain_mix": {"grass": 0.62, "water": 0.07, "sand": 0.12,
                            "stone": 0.07, "tree": 0.08, "ore": 0.04}},
           ["find water", "walk to the water", "go to the lake",
            "reach the water"]),
        _c("creative_find_tree", "walk to a tree",
           "Walk until you stand beside a tree.",
           {"terrain_mix": {"grass": 0.63, "water": 0.07, "sand": 0.12,
                            "stone": 0.08, "tree": 0.06, "ore": 0.04}},
           ["walk to a tree", "find a tree", "go into the woods",
            "approach a tree"]),
        _c("creative_find_ore", "find ore rocks",
           "Search for the purple ore and stand next to it.",
           {"terrain_mix": {"grass": 0.63, "water": 0.07, "sand": 0.12,
                            "stone": 0.07, "tree": 0.07, "ore": 0.04}},
           ["find ore rocks", "find the ore", "locate ore", "go to the ore vein"]),
        _c("creative_find_stone", "visit the rocky outcrop",
           "Walk to the gray rocks and stay there.",
           {"terrain_mix": {"grass": 0.63, "water": 0.07, "sand": 0.12,
                            "stone": 0.06, "tree": 0.08, "ore": 0.04}},
           ["visit the rocky outcrop", "find the boulders",
            "walk to the rocks", "go to the rock field"]),
        _c("creative_place_stone", "place stone blocks around you",
           "Turn and place a stone block on each side.",
           {"inventory": {"stone_block": 8},
            "terrain_mix": {"grass": 0.70, "water": 0.07, "sand": 0.12,
                            "stone": 0.0, "tree": 0.08, "ore": 0.03}},
           ["place stone blocks around you", "build a stone wall around yourself",
            "surround yourself with stone", "place stones in a ring"]),
        _c("creative_wander", "wander the meadow",
           "Keep strolling over the grass without stopping.",
           {},
           ["wander the meadow", "roam the grassland", "stroll around the meadow",
            "keep walking over the grass"]),
        _c("creative_night_walk", "walk around at night",
           "Take a walk in the dark.",
           {"daylight": "night"},
           ["walk around at night", "take a night stroll", "wander in the dark",
            "go for a walk at night"]),
        _c("creative_shore", "walk along the sandy shore",
           "Find sand and follow it.",
           {"terrain_mix": {"grass": 0.64, "water": 0.07, "sand": 0.08,
                            "stone": 0.07, "tree": 0.10, "ore": 0.04}},
           ["walk along the sandy shore", "stroll on the sand", "walk on the beach",
            "follow the sandy shore"]),
    ]
    assert len(tasks) == 24
    return tasks


def task_registry() -> dict:
    return {t.id: t for t in starter_tasks()}


# --- manifest (de)serialization --------------------------------------------

_MANIFEST_KEYS = {"id", "category", "goal", "guidance", "init", "success_fn",
                  "dense_reward", "horizon", "group", "phrases"}


def task_to_record(task) -> dict:
    rec = {
        "id": task.id, "category": task.category, "goal": task.goal,
        "guidance": task.guidance, "init": task.init,
        "success_fn": None if task.is_creative else task.success_fn,
        "dense_reward": None, "horizon": task.horizon, "group": task.group,
        "phrases": list(task.phrases),
    }
    if not task.is_creative and task.dense_reward is not None:
        d = task.dense_reward
        rec["dense_reward"] = {
            "target_kind": d.target_kind, "lam_nav": d.lam_nav,
            "lam_attack": d.lam_attack, "lam_success": d.lam_success,
            "reset_dmin_on_hit": d.reset_dmin_on_hit,
        }
    return rec


def task_from_record(rec: dict):
    unknown = set(rec) - _MANIFEST_KEYS
    if unknown:
        raise ConfigError(f"unknown task manifest keys {sorted(unknown)}")
    missing = {"id", "category", "goal", "init"} - set(rec)
    if missing:
        raise ConfigError(f"task manifest missing keys {sorted(missing)}")
    common = dict(id=rec["id"], category=rec["category"], goal=rec["goal"],
                  guidance=rec.get("guidance", ""), init=rec["init"],
                  horizon=int(rec.get("horizon", 500)),
                  phrases=tuple(rec.get("phrases", (rec["goal"],))))
    if rec.get("success_fn") is None:
        return CreativeTask(group=rec.get("group", "creative"), **common)
    dense = None
    if rec.get("dense_reward") is not None:
        dense = DenseRewardSpec(**rec["dense_reward"])
    return ProgrammaticTask(success_fn=rec["success_fn"], dense_reward=dense,
                            group=rec.get("group", ""), **common)
