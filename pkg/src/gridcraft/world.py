"""Deterministic seeded grid-world simulator.

All operations are pure: ``step`` returns a fresh state and never mutates its
input, and every random draw comes from the counter-based stream keyed by
(seed, tick, stream id), so identical (config, action sequence) pairs replay
bit-identically regardless of scheduling.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from gridcraft import kernels
from gridcraft.actions import CompoundAction, FuncOp, Movement
from gridcraft.constants import (
    AGENT_MAX_FOOD, AGENT_MAX_HEALTH, AGGRO_RADIUS, ATTACK_DAMAGE, BOUNDARY,
    DAYLIGHT_CYCLING, DAYLIGHT_NIGHT, DAYLIGHT_PERIOD, DAYLIGHTS,
    DEFAULT_ATTACK_DAMAGE, ENTITY_DAMAGE, ENTITY_HEALTH, ENTITY_NAMES,
    FOOD_DECAY_INTERVAL, FOOD_VALUE, HARVEST_RULES, HOSTILE_KINDS,
    INVENTORY_SLOTS, ITEM_COLORS, ITEM_NAMES, NIGHT_TINT, OCTANT_OFFSETS,
    PASSABLE_MASK, PICKAXE_TIER, PLACEABLE, RECIPES, STARVATION_INTERVAL,
    TILE_NAMES, VIEW_RADIUS, WEATHERS, EntityKind, Item, Tile, tinted_palette,
)
from gridcraft.rng import counter_randint, counter_uniform

# Counter-RNG stream ids owned by the simulator.
STREAM_TERRAIN = 0
STREAM_SPAWN = 1
STREAM_ENTITY_BASE = 16  # + persistent entity id

DEFAULT_TERRAIN_MIX = {
    "grass": 0.50, "water": 0.10, "sand": 0.15, "stone": 0.10,
    "tree": 0.10, "ore": 0.05,
}

MODE_IDLE, MODE_FLEE, MODE_CHASE = 0, 1, 2


class ConfigError(ValueError):
    """Raised for invalid or unsatisfiable world configuration."""


@dataclass(frozen=True)
class WorldConfig:
    seed: int
    size: int = 32
    terrain_mix: dict = field(default_factory=lambda: dict(DEFAULT_TERRAIN_MIX))
    weather: str = "clear"
    daylight: str = "day"
    spawn_table: tuple = ()  # ((entity_kind_name, count), ...)

    def validate(self) -> None:
        if self.size < 8:
            raise ConfigError(f"size must be >= 8, got {self.size}")
        if self.weather not in WEATHERS:
            raise ConfigError(f"unknown weather {self.weather!r}")
        if self.daylight not in DAYLIGHTS:
            raise ConfigError(f"unknown daylight {self.daylight!r}")
        unknown = set(self.terrain_mix) - set(TILE_NAMES)
        if unknown:
            raise ConfigError(f"unknown terrain kinds {sorted(unknown)}")
        fracs = [self.terrain_mix.get(n, 0.0) for n in TILE_NAMES]
        if any(f < 0 for f in fracs):
            raise ConfigError("terrain fractions must be nonnegative")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError(f"terrain fractions sum to {sum(fracs)}, expected 1")
        for kind, count in self.spawn_table:
            if kind not in ENTITY_NAMES:
                raise ConfigError(f"unknown entity kind {kind!r}")
            if count < 0:
                raise ConfigError("spawn counts must be nonnegative")


@dataclass(frozen=True)
class EntityState:
    eid: int
    kind: EntityKind
    x: int
    y: int
    health: int
    mode: int = MODE_IDLE
    sheared: bool = False


@dataclass(frozen=True)
class AgentState:
    x: int
    y: int
    facing: int = 0  # compass octant, 0 = north
    health: int = AGENT_MAX_HEALTH
    food: int = AGENT_MAX_FOOD
    inventory: tuple = ((0, 0),) * INVENTORY_SLOTS  # (item id, count) per slot
    equipped: int = 0
    last_damage_source: int = -1  # entity kind, -1 = none

    def equipped_item(self) -> Item:
        kind, count = self.inventory[self.equipped]
        return Item(kind) if count > 0 else Item.EMPTY


@dataclass(frozen=True)
class WorldState:
    config: WorldConfig
    grid: np.ndarray  # int8 (size, size), read-only by convention
    entities: tuple   # of EntityState
    agent: AgentState
    tick: int = 0

    @property
    def seed(self) -> int:
        return self.config.seed


@dataclass(frozen=True)
class Observation:
    frame: np.ndarray        # float32 (3, 9, 9) in [0, 1]
    voxel: np.ndarray        # int8 (3, 3) tile ids, BOUNDARY off-map
    gps: np.ndarray          # float32 (2,) in [0, 1]
    compass: np.ndarray      # int32 (2,): yaw octant, pitch (always 0)
    inventory: np.ndarray    # int32 (9, 2): item id, count
    equipment: int           # equipped item id
    life: np.ndarray         # int32 (2,): health, food
    lidar_kind: np.ndarray   # int32 (8,) palette-row hit codes
    lidar_dist: np.ndarray   # int32 (8,) Chebyshev distances
    nearby_tools: np.ndarray  # bool (2,): tree within 3, water within 3
    damage_source: int       # entity kind or -1


def _clustered_grid(config: WorldConfig) -> np.ndarray:
    """Grass background with blob-grown patches of the other tile kinds.

    Patch growth draws every random choice from the terrain counter stream,
    so the grid is a pure function of (seed, size, terrain_mix). Tile counts
    match round(fraction * size^2); a zero fraction yields zero tiles.
    """
    n = config.size
    total = n * n
    grid = np.full((n, n), int(Tile.GRASS), dtype=np.int8)
    assigned = np.zeros((n, n), dtype=bool)
    call = [0]

    def draw(limit: int) -> int:
        v = counter_randint(config.seed, 0, STREAM_TERRAIN, call[0], limit)
        call[0] += 1
        return v

    cells = [(x, y) for y in range(n) for x in range(n)]
    for i in range(total - 1, 0, -1):  # Fisher-Yates off the counter stream
        j = draw(i + 1)
        cells[i], cells[j] = cells[j], cells[i]

    # impassable kinds first so their blobs are not squeezed out
    ptr = 0
    for kind in (Tile.WATER, Tile.STONE, Tile.TREE, Tile.ORE, Tile.SAND):
        need = int(round(config.terrain_mix.get(TILE_NAMES[kind], 0.0) * total))
        while need > 0 and ptr < total:
            while ptr < total and assigned[cells[ptr][1], cells[ptr][0]]:
                ptr += 1
            if ptr >= total:
                break
            blob = min(need, 4 + draw(10))
            frontier = [cells[ptr]]
            ptr += 1
            while frontier and blob > 0:
                fi = draw(len(frontier))
                x, y = frontier.pop(fi)
                if assigned[y, x]:
                    continue
                assigned[y, x] = True
                grid[y, x] = int(kind)
                blob -= 1
                need -= 1
                for dx, dy in ((0, -1), (1, 0), (0, 1), (-1, 0)):
                    nx, ny = x + dx, y + dy
                    if 0 <= nx < n and 0 <= ny < n and not assigned[ny, nx]:
                        frontier.append((nx, ny))
    return grid


def generate_world(config: WorldConfig) -> WorldState:
    """Build the initial state; a pure function of the config (seed included).

    The agent and all spawned entities are placed on the largest 4-connected
    passable component so that every spawn is mutually reachable.
    """
    config.validate()
    grid = _clustered_grid(config)

    passable = PASSABLE_MASK[grid]
    component = _largest_component(passable)
    total_spawns = 1 + sum(c for _, c in config.spawn_table)
    if total_spawns > len(component):
        raise ConfigError(
            f"cannot place {total_spawns} spawns on a passable component of "
            f"{len(component)} tiles (seed {config.seed})")

    cells = list(component)  # sorted (y, x)
    picks = []
    for k in range(total_spawns):
        idx = counter_randint(config.seed, 0, STREAM_SPAWN, k, len(cells))
        picks.append(cells.pop(idx))

    ay, ax = picks[0]
    entities = []
    i = 1
    for kind_name, count in config.spawn_table:
        kind = EntityKind(ENTITY_NAMES.index(kind_name))
        for _ in range(count):
            ey, ex = picks[i]
            i += 1
            entities.append(EntityState(eid=len(entities), kind=kind, x=ex, y=ey,
                                        health=ENTITY_HEALTH[kind]))
    grid.setflags(write=False)
    return WorldState(config=config, grid=grid, entities=tuple(entities),
                      agent=AgentState(x=ax, y=ay), tick=0)


def _largest_component(passable: np.ndarray) -> list:
    """Cells of the largest 4-connected passable region, sorted (y, x)."""
    n = passable.shape[0]
    seen = np.zeros_like(passable, dtype=bool)
    best: list = []
    for y in range(n):
        for x in range(n):
            if passable[y, x] and not seen[y, x]:
                dist = kernels.bfs_dist(passable, np.array([x], dtype=np.int32),
                                        np.array([y], dtype=np.int32))
                ys, xs = np.nonzero(dist >= 0)
                seen[ys, xs] = True
                if len(ys) > len(best):
                    best = sorted(zip(ys.tolist(), xs.tolist()))
    if not best:
        raise ConfigError("world has no passable tiles")
    return best


def is_night(config: WorldConfig, tick: int) -> bool:
    if config.daylight == DAYLIGHT_NIGHT:
        return True
    if config.daylight == DAYLIGHT_CYCLING:
        return (tick % DAYLIGHT_PERIOD) >= DAYLIGHT_PERIOD // 2
    return False


def _occupancy(state: WorldState) -> np.ndarray:
    occ = np.full(state.grid.shape, -1, dtype=np.int16)
    for e in state.entities:
        occ[e.y, e.x] = int(e.kind)
    return occ


def _in_bounds(n: int, x: int, y: int) -> bool:
    return 0 <= x < n and 0 <= y < n


def _passable(grid: np.ndarray, x: int, y: int) -> bool:
    return bool(PASSABLE_MASK[grid[y, x]])


def _inventory_add(inv: list, item: Item, count: int = 1) -> bool:
    """Add into a matching or empty slot; False (unchanged) when full."""
    for i, (kind, c) in enumerate(inv):
        if c > 0 and kind == int(item):
            inv[i] = (kind, c + count)
            return True
    for i, (kind, c) in enumerate(inv):
        if c == 0:
            inv[i] = (int(item), count)
            return True
    return False


def _inventory_remove(inv: list, item: Item, count: int = 1) -> bool:
    """Remove from the first slots holding the item; False if short."""
    have = sum(c for kind, c in inv if kind == int(item) and c > 0)
    if have < count:
        return False
    left = count
    for i, (kind, c) in enumerate(inv):
        if left and kind == int(item) and c > 0:
            take = min(c, left)
            c -= take
            left -= take
            inv[i] = (kind, c) if c > 0 else (0, 0)
    return True


def _count_item(inv, item: Item) -> int:
    return sum(c for kind, c in inv if kind == int(item) and c > 0)


def step(state: WorldState, action: CompoundAction):
    """Advance one tick. Returns (new state, observation, events).

    Every action is legal; ineffective ones no-op with an event. Movement
    into an impassable or occupied cell emits ``blocked``; a melee hit on an
    entity emits ``valid_attack:<kind>`` and deaths emit ``hunted:<kind>``
    within the same step.
    """
    cfg = state.config
    n = cfg.size
    tick = state.tick + 1
    events: list = []

    ax, ay, facing = state.agent.x, state.agent.y, state.agent.facing
    inv = list(state.agent.inventory)
    equipped = state.agent.equipped
    health = state.agent.health
    food = state.agent.food

    entities = {e.eid: e for e in state.entities}

    def entity_at(x, y):
        for e in entities.values():
            if e.x == x and e.y == y:
                return e
        return None

    # -- movement ----------------------------------------------------------
    mv = action.movement
    if mv == Movement.TURN_LEFT:
        facing = (facing - 1) % 8
    elif mv == Movement.TURN_RIGHT:
        facing = (facing + 1) % 8
    elif mv != Movement.STAY:
        dx, dy = {Movement.NORTH: (0, -1), Movement.SOUTH: (0, 1),
                  Movement.EAST: (1, 0), Movement.WEST: (-1, 0)}[mv]
        tx, ty = ax + dx, ay + dy
        if (_in_bounds(n, tx, ty) and _passable(state.grid, tx, ty)
                and entity_at(tx, ty) is None):
            ax, ay = tx, ty
        else:
            events.append("blocked")

    # -- functional action -------------------------------------------------
    fx, fy = ax + OCTANT_OFFSETS[facing][0], ay + OCTANT_OFFSETS[facing][1]
    faced_entity = entity_at(fx, fy) if _in_bounds(n, fx, fy) else None
    held = Item(inv[equipped][0]) if inv[equipped][1] > 0 else Item.EMPTY
    grid = state.grid

    op = action.func
    if op == FuncOp.ATTACK:
        if faced_entity is not None:
            dmg = ATTACK_DAMAGE.get(held, DEFAULT_ATTACK_DAMAGE)
            kind_name = ENTITY_NAMES[faced_entity.kind]
            events.append(f"valid_attack:{kind_name}")
            hp = faced_entity.health - dmg
            if hp <= 0:
                del entities[faced_entity.eid]
                events.append(f"hunted:{kind_name}")
            else:
                mode = (MODE_FLEE if faced_entity.kind not in HOSTILE_KINDS
                        else faced_entity.mode)
                entities[faced_entity.eid] = replace(faced_entity, health=hp, mode=mode)
        elif _in_bounds(n, fx, fy) and Tile(grid[fy, fx]) in HARVEST_RULES:
            tier_needed, yields = HARVEST_RULES[Tile(grid[fy, fx])]
            if PICKAXE_TIER.get(held, 0) >= tier_needed:
                if _inventory_add(inv, yields):
                    events.append(f"harvested:{ITEM_NAMES[yields]}")
                else:
                    events.append("inventory_full")
            else:
                events.append("ineffective")
        else:
            events.append("ineffective")
    elif op == FuncOp.USE:
        if (faced_entity is not None and faced_entity.kind == EntityKind.COW
                and held == Item.BUCKET):
            _inventory_remove(inv, Item.BUCKET)
            _inventory_add(inv, Item.MILK)
            events.append("milked")
        elif (faced_entity is not None and faced_entity.kind == EntityKind.SHEEP
                and held == Item.SHEARS and not faced_entity.sheared):
            _inventory_add(inv, Item.WOOL)
            entities[faced_entity.eid] = replace(faced_entity, sheared=True)
            events.append("sheared")
        elif held in FOOD_VALUE:
            _inventory_remove(inv, held)
            food = min(AGENT_MAX_FOOD, food + FOOD_VALUE[held])
            events.append(f"ate:{ITEM_NAMES[held]}")
        else:
            events.append("ineffective")
    elif op == FuncOp.DROP:
        if inv[equipped][1] > 0:
            kind, c = inv[equipped]
            inv[equipped] = (kind, c - 1) if c > 1 else (0, 0)
            events.append(f"dropped:{ITEM_NAMES[kind]}")
        else:
            events.append("ineffective")
    elif op == FuncOp.CRAFT:
        inputs, (out_item, out_count) = RECIPES[action.arg]
        if all(_count_item(inv, it) >= c for it, c in inputs.items()):
            for it, c in inputs.items():
                _inventory_remove(inv, it, c)
            if _inventory_add(inv, out_item, out_count):
                events.append(f"crafted:{ITEM_NAMES[out_item]}")
            else:  # no room: inputs are not refunded, mirroring a failed craft bench
                events.append("inventory_full")
        else:
            events.append("ineffective")
    elif op == FuncOp.EQUIP:
        equipped = action.arg
    elif op == FuncOp.PLACE:
        slot_kind, slot_count = inv[action.arg]
        item = Item(slot_kind) if slot_count > 0 else Item.EMPTY
        if (item in PLACEABLE and _in_bounds(n, fx, fy)
                and _passable(grid, fx, fy) and faced_entity is None):
            grid = grid.copy()
            grid[fy, fx] = int(PLACEABLE[item])
            grid.setflags(write=False)
            c = slot_count - 1
            inv[action.arg] = (slot_kind, c) if c > 0 else (0, 0)
            events.append(f"placed:{ITEM_NAMES[item]}")
        else:
            events.append("ineffective")
    elif op == FuncOp.DESTROY:
        slot_kind, slot_count = inv[action.arg]
        if slot_count > 0:
            c = slot_count - 1
            inv[action.arg] = (slot_kind, c) if c > 0 else (0, 0)
            events.append(f"destroyed:{ITEM_NAMES[slot_kind]}")
        else:
            events.append("ineffective")

    # -- entity updates (entities act on even ticks only) -------------------
    damage_source = -1
    if tick % 2 == 0:
        for eid in sorted(entities):
            e = entities[eid]
            mode = e.mode
            if e.kind in HOSTILE_KINDS:
                cheb = max(abs(e.x - ax), abs(e.y - ay))
                mode = MODE_CHASE if cheb <= AGGRO_RADIUS else MODE_IDLE
            nx, ny = _entity_move(cfg, grid, entities, e, mode, ax, ay, tick)
            e = replace(e, x=nx, y=ny, mode=mode)
            entities[eid] = e
            if e.kind in HOSTILE_KINDS and max(abs(e.x - ax), abs(e.y - ay)) <= 1:
                health -= ENTITY_DAMAGE[e.kind]
                events.append(f"agent_hurt:{ENTITY_NAMES[e.kind]}")
                damage_source = int(e.kind)

    # -- hunger -------------------------------------------------------------
    if tick % FOOD_DECAY_INTERVAL == 0 and food > 0:
        food -= 1
    if food == 0 and tick % STARVATION_INTERVAL == 0:
        health -= 1
        events.append("starving")
    if health <= 0:
        health = 0
        events.append("agent_died")

    agent = AgentState(x=ax, y=ay, facing=facing, health=health, food=food,
                       inventory=tuple(inv), equipped=equipped,
                       last_damage_source=damage_source)
    new_state = WorldState(config=cfg, grid=grid,
                           entities=tuple(entities[k] for k in sorted(entities)),
                           agent=agent, tick=tick)
    return new_state, observe(new_state), events


def _entity_move(cfg, grid, entities, e, mode, ax, ay, tick):
    """One entity move; deterministic given the counter stream."""
    n = cfg.size

    def free(x, y):
        if not (_in_bounds(n, x, y) and _passable(grid, x, y)):
            return False
        if x == ax and y == ay:
            return False
        return all(o.eid == e.eid or o.x != x or o.y != y
                   for o in entities.values())

    cardinals = ((0, -1), (1, 0), (0, 1), (-1, 0))
    if mode == MODE_IDLE:
        stream = STREAM_ENTITY_BASE + e.eid
        if counter_uniform(cfg.seed, tick, stream, 0) < 0.5:
            d = counter_randint(cfg.seed, tick, stream, 1, 4)
            nx, ny = e.x + cardinals[d][0], e.y + cardinals[d][1]
            if free(nx, ny):
                return nx, ny
        return e.x, e.y

    # flee maximizes, chase minimizes Chebyshev distance to the agent
    best = (e.x, e.y)
    best_d = max(abs(e.x - ax), abs(e.y - ay))
    for dx, dy in cardinals:
        nx, ny = e.x + dx, e.y + dy
        if not free(nx, ny):
            continue
        d = max(abs(nx - ax), abs(ny - ay))
        if (mode == MODE_FLEE and d > best_d) or (mode == MODE_CHASE and d < best_d):
            best, best_d = (nx, ny), d
    return best


def observe(state: WorldState) -> Observation:
    """Render the egocentric observation; deterministic in the state."""
    cfg = state.config
    n = cfg.size
    a = state.agent
    occ = _occupancy(state)
    night = is_night(cfg, state.tick)
    palette = tinted_palette(cfg.weather, night)
    frame = kernels.render_frame(state.grid, occ, a.x, a.y, VIEW_RADIUS, palette)
    # agent pixel shows the equipped item, dimmed as health drops
    agent_rgb = ITEM_COLORS[int(a.equipped_item())] * np.float32(
        0.55 + 0.45 * a.health / AGENT_MAX_HEALTH)
    if night:
        agent_rgb = agent_rgb * NIGHT_TINT
    frame[:, VIEW_RADIUS, VIEW_RADIUS] = agent_rgb
    lidar_kind, lidar_dist = kernels.lidar_scan(state.grid, occ, a.x, a.y)

    voxel = np.full((3, 3), BOUNDARY, dtype=np.int8)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            x, y = a.x + dx, a.y + dy
            if _in_bounds(n, x, y):
                voxel[dy + 1, dx + 1] = state.grid[y, x]

    r = 3
    y0, y1 = max(a.y - r, 0), min(a.y + r + 1, n)
    x0, x1 = max(a.x - r, 0), min(a.x + r + 1, n)
    window = state.grid[y0:y1, x0:x1]
    nearby = np.array([bool((window == int(Tile.TREE)).any()),
                       bool((window == int(Tile.WATER)).any())])

    return Observation(
        frame=frame,
        voxel=voxel,
        gps=np.array([a.x / (n - 1), a.y / (n - 1)], dtype=np.float32),
        compass=np.array([a.facing, 0], dtype=np.int32),
        inventory=np.array(a.inventory, dtype=np.int32),
        equipment=int(a.equipped_item()),
        life=np.array([a.health, a.food], dtype=np.int32),
        lidar_kind=lidar_kind,
        lidar_dist=lidar_dist,
        nearby_tools=nearby,
        damage_source=a.last_damage_source,
    )


def geodesic_distance_map(state: WorldState, sources) -> np.ndarray:
    """BFS distance over passable tiles from (x, y) source cells; -1 unreachable."""
    passable = PASSABLE_MASK[state.grid]
    if not sources:
        return np.full(state.grid.shape, -1, dtype=np.int32)
    sx = np.array([s[0] for s in sources], dtype=np.int32)
    sy = np.array([s[1] for s in sources], dtype=np.int32)
    return kernels.bfs_dist(passable, sx, sy)


def geodesic_distance_to_kind(state: WorldState, kind: EntityKind) -> float:
    """Shortest passable-path distance from the agent to the nearest entity
    of ``kind``; ``inf`` when none is alive or reachable."""
    sources = [(e.x, e.y) for e in state.entities if e.kind == kind]
    if not sources:
        return math.inf
    dist = geodesic_distance_map(state, sources)
    d = int(dist[state.agent.y, state.agent.x])
    return float(d) if d >= 0 else math.inf
