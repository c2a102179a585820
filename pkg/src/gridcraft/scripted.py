"""Scripted demonstrator policies.

Privileged controllers (they read the full world state) that perform each
starter task well enough to generate a caption-paired training corpus and
labeled success/failure sets. Navigation descends a BFS distance map to the
target, interaction turns to face and then uses/attacks. A noise knob takes
occasional random moves so corpora are not single trajectories repeated.
"""

import numpy as np

from gridcraft.actions import CompoundAction, FuncOp, Movement, NO_OP_ACTION
from gridcraft.constants import (
    ENTITY_NAMES, ITEM_BY_NAME, OCTANT_OFFSETS, PASSABLE_MASK, EntityKind,
    Item, Tile,
)
from gridcraft.world import WorldState, geodesic_distance_map

_CARDINAL_MOVES = {(0, -1): Movement.NORTH, (0, 1): Movement.SOUTH,
                   (1, 0): Movement.EAST, (-1, 0): Movement.WEST}
_OFFSET_TO_OCTANT = {off: i for i, off in enumerate(OCTANT_OFFSETS)}


def _sign(v) -> int:
    v = int(v)
    return (v > 0) - (v < 0)


def _facing_action(facing: int, desired: int) -> Movement | None:
    """Turn toward the desired octant, or None when already facing it."""
    diff = (desired - facing) % 8
    if diff == 0:
        return None
    return Movement.TURN_RIGHT if diff <= 4 else Movement.TURN_LEFT


def _toward(state: WorldState, dist: np.ndarray, rng) -> Movement:
    """Descend the BFS map; random passable move when there is no descent."""
    a = state.agent
    d0 = dist[a.y, a.x]
    options = []
    for (dx, dy), mv in _CARDINAL_MOVES.items():
        x, y = a.x + dx, a.y + dy
        if 0 <= x < state.config.size and 0 <= y < state.config.size:
            d = dist[y, x]
            if d >= 0 and (d0 < 0 or d < d0):
                options.append((d, int(mv), mv))
    if options:
        options.sort()
        return options[0][2]
    return _random_move(state, rng)


def _away(state: WorldState, dist: np.ndarray, rng) -> Movement:
    """Ascend the BFS map (flee); random move when boxed in."""
    a = state.agent
    d0 = dist[a.y, a.x]
    best = None
    for (dx, dy), mv in _CARDINAL_MOVES.items():
        x, y = a.x + dx, a.y + dy
        if (0 <= x < state.config.size and 0 <= y < state.config.size
                and PASSABLE_MASK[state.grid[y, x]] and dist[y, x] > d0):
            if best is None or dist[y, x] > best[0]:
                best = (dist[y, x], mv)
    return best[1] if best else _random_move(state, rng)


def _random_move(state: WorldState, rng) -> Movement:
    moves = list(_CARDINAL_MOVES.values())
    order = rng.permutation(len(moves))
    a = state.agent
    for i in order:
        mv = moves[int(i)]
        dx, dy = [k for k, v in _CARDINAL_MOVES.items() if v == mv][0]
        x, y = a.x + dx, a.y + dy
        if (0 <= x < state.config.size and 0 <= y < state.config.size
                and PASSABLE_MASK[state.grid[y, x]]):
            return mv
    return Movement.STAY


def _slot_of(state: WorldState, item: Item) -> int | None:
    for i, (kind, count) in enumerate(state.agent.inventory):
        if count > 0 and kind == int(item):
            return i
    return None


def _count(state: WorldState, item: Item) -> int:
    return sum(c for k, c in state.agent.inventory if k == int(item) and c > 0)


class ScriptedPolicy:
    """Base: subclasses implement ``decide``; noise mixes in random moves."""

    def __init__(self, task, noise: float = 0.0):
        self.task = task
        self.noise = noise

    def reset(self) -> None:
        pass

    def act(self, state: WorldState, rng) -> CompoundAction:
        # noise is decided before `decide` so stateful policies never advance
        # on a step they did not control
        if self.noise > 0 and rng.random() < self.noise:
            return CompoundAction(_random_move(state, rng), FuncOp.NO_OP)
        return self.decide(state, rng)

    def decide(self, state: WorldState, rng) -> CompoundAction:
        raise NotImplementedError

    def performing(self, state: WorldState) -> bool:
        """Whether the current step shows the task behavior (used to align
        caption snippets with the part of the trajectory that depicts it)."""
        return True


class InteractEntityPolicy(ScriptedPolicy):
    """Walk to the nearest matching entity, face it, then use or attack."""

    def __init__(self, task, kind: EntityKind, func: FuncOp, tool: Item | None,
                 require_unsheared: bool = False, noise: float = 0.0):
        super().__init__(task, noise)
        self.kind = kind
        self.func = func
        self.tool = tool
        self.require_unsheared = require_unsheared

    def _targets(self, state):
        return [e for e in state.entities
                if e.kind == self.kind and not (self.require_unsheared and e.sheared)]

    def performing(self, state):
        a = state.agent
        return any(max(abs(e.x - a.x), abs(e.y - a.y)) <= 2
                   for e in self._targets(state))

    def decide(self, state, rng):
        targets = self._targets(state)
        if not targets:
            return CompoundAction(_random_move(state, rng), FuncOp.NO_OP)
        if self.tool is not None and state.agent.equipped_item() != self.tool:
            slot = _slot_of(state, self.tool)
            if slot is not None:
                return CompoundAction(Movement.STAY, FuncOp.EQUIP, slot)
        a = state.agent
        best = min(targets, key=lambda e: max(abs(e.x - a.x), abs(e.y - a.y)))
        cheb = max(abs(best.x - a.x), abs(best.y - a.y))
        if cheb <= 1:
            desired = _OFFSET_TO_OCTANT[(_sign(best.x - a.x), _sign(best.y - a.y))]
            turn = _facing_action(a.facing, desired)
            # turning and acting happen in the same step: facing resolves first
            return CompoundAction(turn or Movement.STAY, self.func)
        dist = geodesic_distance_map(state, [(e.x, e.y) for e in targets])
        return CompoundAction(_toward(state, dist, rng), FuncOp.NO_OP)


class HarvestTilePolicy(ScriptedPolicy):
    """Walk next to the nearest matching tile, face it, and attack."""

    def __init__(self, task, tile: Tile, tool: Item | None = None,
                 stop_item: Item | None = None, stop_count: int = 1,
                 noise: float = 0.0):
        super().__init__(task, noise)
        self.tile = tile
        self.tool = tool
        self.stop_item = stop_item
        self.stop_count = stop_count

    def done_harvesting(self, state) -> bool:
        return (self.stop_item is not None
                and _count(state, self.stop_item) >= self.stop_count)

    def performing(self, state):
        if self.done_harvesting(state):
            return True
        a = state.agent
        cells = np.argwhere(state.grid == int(self.tile))
        return len(cells) > 0 and             int(np.min(np.max(np.abs(cells - [a.y, a.x]), axis=1))) <= 2

    def decide(self, state, rng):
        if self.done_harvesting(state):
            return NO_OP_ACTION
        if self.tool is not None and state.agent.equipped_item() != self.tool:
            slot = _slot_of(state, self.tool)
            if slot is not None:
                return CompoundAction(Movement.STAY, FuncOp.EQUIP, slot)
        a = state.agent
        cells = np.argwhere(state.grid == int(self.tile))
        if len(cells) == 0:
            return CompoundAction(_random_move(state, rng), FuncOp.NO_OP)
        cheb = np.max(np.abs(cells - [a.y, a.x]), axis=1)
        i = int(np.argmin(cheb))
        if cheb[i] <= 1:
            ty, tx = cells[i]
            desired = _OFFSET_TO_OCTANT[(_sign(tx - a.x), _sign(ty - a.y))]
            turn = _facing_action(a.facing, desired)
            return CompoundAction(turn or Movement.STAY, FuncOp.ATTACK)
        dist = geodesic_distance_map(state, [(int(x), int(y)) for y, x in cells])
        return CompoundAction(_toward(state, dist, rng), FuncOp.NO_OP)


class CraftChainPolicy(ScriptedPolicy):
    """Gather wood (and optionally stone), then run a recipe sequence."""

    def __init__(self, task, wood_needed: int, recipes, stone_needed: int = 0,
                 noise: float = 0.0):
        super().__init__(task, noise)
        self.wood_needed = wood_needed
        self.stone_needed = stone_needed
        self.recipes = list(recipes)
        self.wood_getter = HarvestTilePolicy(task, Tile.TREE,
                                             stop_item=Item.WOOD,
                                             stop_count=wood_needed)
        self.stone_getter = HarvestTilePolicy(task, Tile.STONE,
                                              tool=Item.WOODEN_PICKAXE,
                                              stop_item=Item.STONE_BLOCK,
                                              stop_count=stone_needed)
        self.step_idx = 0

    def reset(self):
        self.step_idx = 0

    def performing(self, state):
        if self.step_idx > 0:
            return True
        if _count(state, Item.WOOD) < self.wood_needed:
            return self.wood_getter.performing(state)
        if self.stone_needed and _count(state, Item.STONE_BLOCK) < self.stone_needed:
            return self.stone_getter.performing(state)
        return True

    def decide(self, state, rng):
        if _count(state, Item.WOOD) < self.wood_needed and self.step_idx == 0:
            return self.wood_getter.decide(state, rng)
        if self.stone_needed and _count(state, Item.STONE_BLOCK) < self.stone_needed \
                and self.step_idx == 0:
            return self.stone_getter.decide(state, rng)
        if self.step_idx < len(self.recipes):
            r = self.recipes[self.step_idx]
            self.step_idx += 1
            return CompoundAction(Movement.STAY, FuncOp.CRAFT, r)
        return NO_OP_ACTION


class SurvivePolicy(ScriptedPolicy):
    def decide(self, state, rng):
        a = state.agent
        # eat when hungry
        if a.food < 12:
            for item in (Item.MEAT, Item.MILK):
                slot = _slot_of(state, item)
                if slot is not None:
                    if a.equipped == slot:
                        return CompoundAction(Movement.STAY, FuncOp.USE)
                    return CompoundAction(Movement.STAY, FuncOp.EQUIP, slot)
        hostiles = [e for e in state.entities
                    if ENTITY_NAMES[e.kind] in ("zombie", "spider")]
        if hostiles:
            near = min(max(abs(e.x - a.x), abs(e.y - a.y)) for e in hostiles)
            if near <= 4:
                dist = geodesic_distance_map(state, [(e.x, e.y) for e in hostiles])
                return CompoundAction(_away(state, dist, rng), FuncOp.NO_OP)
        if rng.random() < 0.4:
            return CompoundAction(_random_move(state, rng), FuncOp.NO_OP)
        return NO_OP_ACTION


def _largest_tile_blob(grid: np.ndarray, tile: Tile) -> np.ndarray:
    """(y, x) cells of the largest 4-connected patch of the tile kind."""
    mask = grid == int(tile)
    seen = np.zeros_like(mask)
    best: list = []
    n = grid.shape[0]
    for y, x in np.argwhere(mask):
        if seen[y, x]:
            continue
        comp = [(int(y), int(x))]
        seen[y, x] = True
        i = 0
        while i < len(comp):
            cy, cx = comp[i]
            i += 1
            for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                ny, nx = cy + dy, cx + dx
                if 0 <= ny < n and 0 <= nx < n and mask[ny, nx] \
                        and not seen[ny, nx]:
                    seen[ny, nx] = True
                    comp.append((ny, nx))
        if len(comp) > len(best):
            best = comp
    return np.array(best, dtype=np.int64).reshape(-1, 2)


class GoToTilePolicy(ScriptedPolicy):
    """Creative navigation: reach the largest patch of the tile kind and
    linger beside it with the patch filling the view."""

    def __init__(self, task, tile: Tile, noise: float = 0.0):
        super().__init__(task, noise)
        self.tile = tile
        self._blob_cache = (None, None)

    def _blob(self, state):
        key = id(state.grid)
        if self._blob_cache[0] != key:
            self._blob_cache = (key, _largest_tile_blob(state.grid, self.tile))
        return self._blob_cache[1]

    def performing(self, state):
        """Beside the patch with several of its cells inside the view."""
        cells = self._blob(state)
        if len(cells) == 0:
            return False
        a = state.agent
        cheb = np.max(np.abs(cells - [a.y, a.x]), axis=1)
        return bool(cheb.min() <= 1 and (cheb <= 4).sum() >= 5)

    def decide(self, state, rng):
        a = state.agent
        cells = self._blob(state)
        if len(cells) == 0:
            return CompoundAction(_random_move(state, rng), FuncOp.NO_OP)
        cheb = int(np.min(np.max(np.abs(cells - [a.y, a.x]), axis=1)))
        if cheb <= 1:
            # linger at the edge: mostly stand, occasionally shuffle
            if rng.random() < 0.75:
                return NO_OP_ACTION
            return CompoundAction(_random_move(state, rng), FuncOp.NO_OP)
        dist = geodesic_distance_map(state, [(int(x), int(y)) for y, x in cells])
        return CompoundAction(_toward(state, dist, rng), FuncOp.NO_OP)


class AvoidTilePolicy(ScriptedPolicy):
    """Failure counterpart of GoToTile: keep far from the tile kind."""

    def __init__(self, task, tile: Tile, min_dist: int = 5, noise: float = 0.0):
        super().__init__(task, noise)
        self.tile = tile
        self.min_dist = min_dist

    def decide(self, state, rng):
        a = state.agent
        cells = np.argwhere(state.grid == int(self.tile))
        if len(cells) == 0:
            return CompoundAction(_random_move(state, rng), FuncOp.NO_OP)
        cheb = int(np.min(np.max(np.abs(cells - [a.y, a.x]), axis=1)))
        if cheb < self.min_dist:
            dist = geodesic_distance_map(state, [(int(x), int(y)) for y, x in cells])
            return CompoundAction(_away(state, dist, rng), FuncOp.NO_OP)
        if rng.random() < 0.3:
            return CompoundAction(_random_move(state, rng), FuncOp.NO_OP)
        return NO_OP_ACTION


class PlaceAroundPolicy(ScriptedPolicy):
    """Turn through the compass and place a block on each free side."""

    def __init__(self, task, item: Item, noise: float = 0.0):
        super().__init__(task, noise)
        self.item = item

    def decide(self, state, rng):
        a = state.agent
        slot = _slot_of(state, self.item)
        if slot is None:
            return NO_OP_ACTION
        if a.equipped != slot:
            return CompoundAction(Movement.STAY, FuncOp.EQUIP, slot)
        dx, dy = OCTANT_OFFSETS[a.facing]
        x, y = a.x + dx, a.y + dy
        n = state.config.size
        occupied = {(e.x, e.y) for e in state.entities}
        if (0 <= x < n and 0 <= y < n and PASSABLE_MASK[state.grid[y, x]]
                and (x, y) not in occupied):
            return CompoundAction(Movement.STAY, FuncOp.PLACE, slot)
        return CompoundAction(Movement.TURN_RIGHT, FuncOp.NO_OP)


class WanderPolicy(ScriptedPolicy):
    """Keep moving; direction persists a few steps then re-rolls."""

    def __init__(self, task, noise: float = 0.0):
        super().__init__(task, noise)
        self.direction = None
        self.steps_left = 0

    def reset(self):
        self.direction = None
        self.steps_left = 0

    def decide(self, state, rng):
        if self.direction is None or self.steps_left <= 0:
            self.direction = _random_move(state, rng)
            self.steps_left = int(rng.integers(3, 7))
        self.steps_left -= 1
        a = state.agent
        dx, dy = [k for k, v in _CARDINAL_MOVES.items() if v == self.direction][0]
        x, y = a.x + dx, a.y + dy
        if not (0 <= x < state.config.size and 0 <= y < state.config.size
                and PASSABLE_MASK[state.grid[y, x]]):
            self.direction = _random_move(state, rng)
        return CompoundAction(self.direction, FuncOp.NO_OP)


class IdlePolicy(ScriptedPolicy):
    def decide(self, state, rng):
        return NO_OP_ACTION


class WarmupPolicy(ScriptedPolicy):
    """Wander for a random prefix before handing over to the inner policy,
    so even trivially quick tasks leave snippet-length trajectories."""

    def __init__(self, inner: ScriptedPolicy, min_delay: int = 14,
                 max_delay: int = 30):
        super().__init__(inner.task, noise=0.0)
        self.inner = inner
        self.min_delay = min_delay
        self.max_delay = max_delay
        self.wander = WanderPolicy(inner.task)
        self.remaining = None

    def reset(self):
        self.inner.reset()
        self.wander.reset()
        self.remaining = None

    def act(self, state, rng):
        if self.remaining is None:
            self.remaining = int(rng.integers(self.min_delay, self.max_delay + 1))
        if self.remaining > 0:
            self.remaining -= 1
            return self.wander.act(state, rng)
        return self.inner.act(state, rng)

    def performing(self, state):
        if self.remaining is None or self.remaining > 0:
            return False
        return self.inner.performing(state)


class RandomPolicy(ScriptedPolicy):
    """Uniform random movement with occasional random argless functional."""

    def decide(self, state, rng):
        mv = Movement(int(rng.integers(7)))
        func = FuncOp.NO_OP if rng.random() < 0.7 else \
            FuncOp(int(rng.integers(1, 4)))
        return CompoundAction(mv, func)


def demonstrator_for(task, noise: float = 0.0) -> ScriptedPolicy:
    """The success-behavior controller for a starter task id."""
    t = task.id
    if t == "harvest_milk":
        return InteractEntityPolicy(task, EntityKind.COW, FuncOp.USE,
                                    Item.BUCKET, noise=noise)
    if t == "harvest_wool":
        return InteractEntityPolicy(task, EntityKind.SHEEP, FuncOp.USE,
                                    Item.SHEARS, require_unsheared=True,
                                    noise=noise)
    if t == "harvest_wood":
        return HarvestTilePolicy(task, Tile.TREE, stop_item=Item.WOOD,
                                 noise=noise)
    if t == "harvest_stone":
        return HarvestTilePolicy(task, Tile.STONE, tool=Item.WOODEN_PICKAXE,
                                 stop_item=Item.STONE_BLOCK, noise=noise)
    if t in ("combat_cow", "combat_sheep", "combat_zombie", "combat_spider"):
        kind = ENTITY_NAMES.index(t.split("_")[1])
        return InteractEntityPolicy(task, EntityKind(kind), FuncOp.ATTACK,
                                    Item.STONE_SWORD, noise=noise)
    if t == "tech_plank":
        return CraftChainPolicy(task, wood_needed=1, recipes=[0], noise=noise)
    if t == "tech_stick":
        return CraftChainPolicy(task, wood_needed=1, recipes=[0, 1], noise=noise)
    if t == "tech_wooden_sword":
        return CraftChainPolicy(task, wood_needed=2, recipes=[0, 0, 1, 2],
                                noise=noise)
    if t == "tech_stone_pickaxe":
        return CraftChainPolicy(task, wood_needed=1, recipes=[0, 1, 4],
                                stone_needed=2, noise=noise)
    if t.startswith("survive"):
        return SurvivePolicy(task, noise=noise)
    if t == "creative_find_water":
        return GoToTilePolicy(task, Tile.WATER, noise=noise)
    if t == "creative_find_tree":
        return GoToTilePolicy(task, Tile.TREE, noise=noise)
    if t == "creative_find_ore":
        return GoToTilePolicy(task, Tile.ORE, noise=noise)
    if t == "creative_find_stone":
        return GoToTilePolicy(task, Tile.STONE, noise=noise)
    if t == "creative_place_stone":
        return PlaceAroundPolicy(task, Item.STONE_BLOCK, noise=noise)
    if t in ("creative_wander", "creative_night_walk"):
        return WanderPolicy(task, noise=noise)
    if t == "creative_shore":
        return GoToTilePolicy(task, Tile.SAND, noise=noise)
    raise KeyError(f"no demonstrator for task {t!r}")


def failure_policy_for(task, noise: float = 0.0) -> ScriptedPolicy:
    """A controller that visibly does not perform the task."""
    t = task.id
    if t in ("creative_find_water", "creative_shore"):
        tile = Tile.WATER if "water" in t else Tile.SAND
        return AvoidTilePolicy(task, tile, noise=noise)
    if t == "creative_find_tree":
        return AvoidTilePolicy(task, Tile.TREE, noise=noise)
    if t == "creative_find_ore":
        return AvoidTilePolicy(task, Tile.ORE, noise=noise)
    if t == "creative_find_stone":
        return AvoidTilePolicy(task, Tile.STONE, noise=noise)
    if t in ("creative_wander", "creative_night_walk"):
        return IdlePolicy(task)
    if t == "creative_place_stone":
        return WanderPolicy(task, noise=noise)
    return RandomPolicy(task, noise=noise)


def failure_variants(task, noise: float = 0.0) -> list:
    """(task variant, policy) pairs whose runs visibly do not depict the
    behavior. Where the behavior's signature is what the agent carries or
    when it acts, the failure drops that signature entirely: place-stone
    failures wander empty-handed, night-walk failures walk by day."""
    from dataclasses import replace as _replace
    if task.id == "creative_night_walk":
        day = _replace(task, init={**task.init, "daylight": "day"})
        return [(day, WanderPolicy(day, noise=noise))]
    if task.id == "creative_place_stone":
        bare = _replace(task, init={k: v for k, v in task.init.items()
                                    if k != "inventory"})
        return [(bare, WanderPolicy(bare, noise=noise))]
    return [(task, failure_policy_for(task, noise=noise))]


def labeled_success_filter(task):
    """Quality bar for a run to count as a positive label: the behavior must
    be depicted prominently, not merely achieved in passing."""
    if task.id == "creative_place_stone":
        return lambda run: sum(
            1 for evs in run.events for e in evs
            if e.startswith("placed:")) >= 6
    if task.is_creative:
        return lambda run: float(np.mean(run.marks)) >= 0.35
    return lambda run: run.success
