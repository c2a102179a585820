"""Game-rule constants: tiles, entities, items, recipes, damage tables.

Numeric tables (damage, health, loot-free harvest rules) live in
``data/game_constants.json`` so they are inspectable and documented in one
place; this module loads them once at import and exposes typed views.
"""

import json
from enum import IntEnum
from importlib import resources

import numpy as np


class Tile(IntEnum):
    GRASS = 0
    WATER = 1
    SAND = 2
    STONE = 3
    TREE = 4
    ORE = 5


#: Sentinel tile id used for out-of-bounds cells in rendering and lidar.
BOUNDARY = 6

TILE_NAMES = ["grass", "water", "sand", "stone", "tree", "ore"]
PASSABLE = frozenset({Tile.GRASS, Tile.SAND})

#: uint8 lookup: PASSABLE_MASK[tile_id] == 1 iff an agent/entity may stand there.
PASSABLE_MASK = np.zeros(len(Tile), dtype=np.uint8)
for _t in PASSABLE:
    PASSABLE_MASK[_t] = 1


class EntityKind(IntEnum):
    COW = 0
    SHEEP = 1
    PIG = 2
    SPIDER = 3
    ZOMBIE = 4


ENTITY_NAMES = ["cow", "sheep", "pig", "spider", "zombie"]
PASSIVE_KINDS = frozenset({EntityKind.COW, EntityKind.SHEEP, EntityKind.PIG})
HOSTILE_KINDS = frozenset({EntityKind.SPIDER, EntityKind.ZOMBIE})


class Item(IntEnum):
    EMPTY = 0          # bare hand / empty slot
    WOOD = 1
    PLANK = 2
    STICK = 3
    WOODEN_SWORD = 4
    WOODEN_PICKAXE = 5
    STONE_BLOCK = 6
    STONE_PICKAXE = 7
    STONE_SWORD = 8
    ORE_CHUNK = 9
    SHEARS = 10
    BUCKET = 11
    MILK = 12
    WOOL = 13
    MEAT = 14


ITEM_NAMES = [
    "empty", "wood", "plank", "stick", "wooden_sword", "wooden_pickaxe",
    "stone_block", "stone_pickaxe", "stone_sword", "ore_chunk", "shears",
    "bucket", "milk", "wool", "meat",
]

ITEM_BY_NAME = {n: Item(i) for i, n in enumerate(ITEM_NAMES)}
ENTITY_BY_NAME = {n: EntityKind(i) for i, n in enumerate(ENTITY_NAMES)}
TILE_BY_NAME = {n: Tile(i) for i, n in enumerate(TILE_NAMES)}


def _load_game_constants():
    with resources.files("gridcraft.data").joinpath("game_constants.json").open() as f:
        return json.load(f)


_GC = _load_game_constants()

#: Melee damage dealt by the agent, indexed by equipped Item id.
ATTACK_DAMAGE = {ITEM_BY_NAME[k]: v for k, v in _GC["attack_damage"].items()}
DEFAULT_ATTACK_DAMAGE = _GC["default_attack_damage"]

#: Entity max health, indexed by EntityKind.
ENTITY_HEALTH = {ENTITY_BY_NAME[k]: v for k, v in _GC["entity_health"].items()}

#: Damage an adjacent hostile deals to the agent on its action tick.
ENTITY_DAMAGE = {ENTITY_BY_NAME[k]: v for k, v in _GC["entity_damage"].items()}

AGENT_MAX_HEALTH = _GC["agent_max_health"]
AGENT_MAX_FOOD = _GC["agent_max_food"]
FOOD_DECAY_INTERVAL = _GC["food_decay_interval"]
STARVATION_INTERVAL = _GC["starvation_interval"]
AGGRO_RADIUS = _GC["aggro_radius"]
DAYLIGHT_PERIOD = _GC["daylight_period"]

#: Food restored when consuming an edible item with `use`.
FOOD_VALUE = {ITEM_BY_NAME[k]: v for k, v in _GC["food_value"].items()}

#: tile -> (required pickaxe tier, harvested item). Tier 0 = any equipment.
HARVEST_RULES = {
    TILE_BY_NAME[k]: (v["tier"], ITEM_BY_NAME[v["yields"]])
    for k, v in _GC["harvest_rules"].items()
}

#: Pickaxe tier per item (non-pickaxes are tier 0).
PICKAXE_TIER = {ITEM_BY_NAME[k]: v for k, v in _GC["pickaxe_tier"].items()}

#: Items that may be placed on a passable tile, and the tile they become.
PLACEABLE = {ITEM_BY_NAME[k]: TILE_BY_NAME[v] for k, v in _GC["placeable"].items()}

#: Crafting recipes, index = craft argument. Each: ({input item: count}, (output, count)).
RECIPES = [
    ({ITEM_BY_NAME[k]: v for k, v in r["inputs"].items()},
     (ITEM_BY_NAME[r["output"]], r["count"]))
    for r in _GC["recipes"]
]
N_RECIPES = len(RECIPES)
assert N_RECIPES == 8

INVENTORY_SLOTS = 9

#: The 8 compass octants, clockwise from north. Facing index -> (dx, dy) with
#: x = column (east positive), y = row (south positive).
OCTANT_OFFSETS = [
    (0, -1),   # N
    (1, -1),   # NE
    (1, 0),    # E
    (1, 1),    # SE
    (0, 1),    # S
    (-1, 1),   # SW
    (-1, 0),   # W
    (-1, -1),  # NW
]
N_OCTANTS = 8

VIEW_RADIUS = 4
FRAME_SIZE = 2 * VIEW_RADIUS + 1  # 9
FRAME_SHAPE = (3, FRAME_SIZE, FRAME_SIZE)

# Render palette rows: 0..5 tiles, 6 boundary, 7 agent, 8..12 entities.
PALETTE_AGENT = 7
PALETTE_ENTITY_BASE = 8
BASE_PALETTE = np.array([
    [0.20, 0.65, 0.20],   # grass
    [0.15, 0.30, 0.80],   # water
    [0.85, 0.75, 0.45],   # sand
    [0.50, 0.50, 0.52],   # stone
    [0.04, 0.27, 0.04],   # tree
    [0.55, 0.12, 0.75],   # ore
    [0.05, 0.05, 0.05],   # boundary
    [0.90, 0.15, 0.15],   # agent
    [0.75, 0.55, 0.35],   # cow
    [0.92, 0.92, 0.92],   # sheep
    [0.95, 0.65, 0.70],   # pig
    [0.25, 0.12, 0.12],   # spider
    [0.30, 0.60, 0.35],   # zombie
], dtype=np.float32)

#: Agent-pixel colors by equipped item: the frame analog of seeing the held
#: tool. EMPTY keeps the base agent red.
ITEM_COLORS = np.array([
    [0.90, 0.15, 0.15],   # empty (bare hand)
    [0.55, 0.35, 0.10],   # wood
    [0.80, 0.60, 0.30],   # plank
    [0.65, 0.50, 0.25],   # stick
    [0.85, 0.45, 0.10],   # wooden_sword
    [0.75, 0.55, 0.50],   # wooden_pickaxe
    [0.55, 0.55, 0.58],   # stone_block
    [0.40, 0.42, 0.48],   # stone_pickaxe
    [0.20, 0.22, 0.90],   # stone_sword
    [0.50, 0.20, 0.70],   # ore_chunk
    [0.90, 0.90, 0.20],   # shears
    [0.20, 0.85, 0.85],   # bucket
    [0.98, 0.98, 0.90],   # milk
    [0.95, 0.80, 0.95],   # wool
    [0.80, 0.30, 0.40],   # meat
], dtype=np.float32)

WEATHER_CLEAR, WEATHER_RAIN, WEATHER_SNOW = "clear", "rain", "snow"
WEATHERS = (WEATHER_CLEAR, WEATHER_RAIN, WEATHER_SNOW)
DAYLIGHT_DAY, DAYLIGHT_NIGHT, DAYLIGHT_CYCLING = "day", "night", "cycling"
DAYLIGHTS = (DAYLIGHT_DAY, DAYLIGHT_NIGHT, DAYLIGHT_CYCLING)

#: Channel-wise multiplicative tints, applied palette-wide before lookup.
WEATHER_TINT = {
    WEATHER_CLEAR: np.array([1.0, 1.0, 1.0], dtype=np.float32),
    WEATHER_RAIN: np.array([0.70, 0.75, 0.95], dtype=np.float32),
    WEATHER_SNOW: np.array([1.20, 1.20, 1.25], dtype=np.float32),
}
NIGHT_TINT = np.float32(0.45)


def tinted_palette(weather: str, is_night: bool) -> np.ndarray:
    """Palette with weather and daylight applied; rendering is then pure lookup."""
    pal = BASE_PALETTE * WEATHER_TINT[weather]
    if is_night:
        pal = pal * NIGHT_TINT
    return np.clip(pal, 0.0, 1.0).astype(np.float32)
