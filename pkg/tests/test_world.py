import math
from dataclasses import replace

import numpy as np
import pytest

from gridcraft.actions import CompoundAction, FuncOp, Movement, NO_OP_ACTION, decode_action
from gridcraft.constants import (
    AGENT_MAX_HEALTH, BOUNDARY, ENTITY_HEALTH, ITEM_COLORS, OCTANT_OFFSETS,
    PASSABLE_MASK, EntityKind, Item, Tile,
)
from gridcraft.world import (
    ConfigError, WorldConfig, generate_world, geodesic_distance_to_kind,
    observe, step,
)


def states_equal(a, b) -> bool:
    return (a.config == b.config and np.array_equal(a.grid, b.grid)
            and a.entities == b.entities and a.agent == b.agent
            and a.tick == b.tick)


def obs_equal(a, b) -> bool:
    return (np.array_equal(a.frame, b.frame) and np.array_equal(a.voxel, b.voxel)
            and np.array_equal(a.gps, b.gps)
            and np.array_equal(a.inventory, b.inventory)
            and np.array_equal(a.lidar_kind, b.lidar_kind)
            and np.array_equal(a.lidar_dist, b.lidar_dist)
            and a.equipment == b.equipment and a.damage_source == b.damage_source)


CFG = WorldConfig(seed=0, size=16, spawn_table=(("cow", 2), ("zombie", 1)))


def test_generate_world_deterministic():
    a, b = generate_world(CFG), generate_world(CFG)
    assert np.array_equal(a.grid, b.grid)
    assert a.agent == b.agent
    assert a.entities == b.entities


def test_seeds_differ():
    a = generate_world(CFG)
    b = generate_world(replace(CFG, seed=1))
    assert (a.grid != b.grid).sum() >= 1


def test_zero_fraction_forces_zero_tiles():
    mix = {"grass": 0.6, "water": 0.0, "sand": 0.15, "stone": 0.1,
           "tree": 0.1, "ore": 0.05}
    state = generate_world(replace(CFG, terrain_mix=mix))
    assert not (state.grid == int(Tile.WATER)).any()


def test_agent_spawns_on_passable():
    s = generate_world(CFG)
    assert PASSABLE_MASK[s.grid[s.agent.y, s.agent.x]]
    for e in s.entities:
        assert PASSABLE_MASK[s.grid[e.y, e.x]]


def test_spawn_table_honored_exactly():
    s = generate_world(CFG)
    kinds = [e.kind for e in s.entities]
    assert kinds.count(EntityKind.COW) == 2
    assert kinds.count(EntityKind.ZOMBIE) == 1


def test_unsatisfiable_spawn_errors():
    with pytest.raises(ConfigError):
        generate_world(replace(CFG, spawn_table=(("cow", 10_000),)))


def test_config_validation():
    with pytest.raises(ConfigError):
        WorldConfig(seed=0, size=4).validate()
    with pytest.raises(ConfigError):
        WorldConfig(seed=0, terrain_mix={"grass": 0.5}).validate()
    with pytest.raises(ConfigError):
        WorldConfig(seed=0, weather="hail").validate()


def test_noop_step_keeps_position_and_advances_tick():
    s = generate_world(CFG)
    ns, obs, events = step(s, NO_OP_ACTION)
    assert ns.tick == s.tick + 1
    assert (ns.agent.x, ns.agent.y) == (s.agent.x, s.agent.y)
    assert s.tick == 0  # input not mutated


def test_step_pure_function():
    s = generate_world(CFG)
    a = decode_action(41)
    r1 = step(s, a)
    r2 = step(s, a)
    assert states_equal(r1[0], r2[0])
    assert obs_equal(r1[1], r2[1])
    assert r1[2] == r2[2]


def test_determinism_of_action_sequence():
    rng = np.random.default_rng(0)
    seq = [decode_action(int(rng.integers(273))) for _ in range(200)]

    def run():
        s = generate_world(CFG)
        stream = []
        for a in seq:
            s, obs, ev = step(s, a)
            stream.append((s.agent, tuple(ev), obs.frame.tobytes()))
        return s, stream

    s1, t1 = run()
    s2, t2 = run()
    assert states_equal(s1, s2) and t1 == t2


def _hand_crafted_state(tile=Tile.GRASS, entity_kind=None, inventory=()):
    """Small open world with the agent centered and an optional faced entity."""
    cfg = WorldConfig(seed=5, size=12)
    s = generate_world(cfg)
    grid = np.full((12, 12), int(Tile.GRASS), dtype=np.int8)
    grid.setflags(write=False)
    agent = replace(s.agent, x=6, y=6, facing=0, inventory=tuple(inventory)
                    or ((0, 0),) * 9)
    entities = ()
    if entity_kind is not None:
        from gridcraft.world import EntityState
        entities = (EntityState(eid=0, kind=entity_kind, x=6, y=5,
                                health=ENTITY_HEALTH[entity_kind]),)
    return replace(s, grid=grid, entities=entities, agent=agent)


def test_blocked_movement():
    s = _hand_crafted_state()
    grid = s.grid.copy()
    grid[5, 6] = int(Tile.WATER)  # north of agent
    grid.setflags(write=False)
    s = replace(s, grid=grid)
    ns, _, events = step(s, CompoundAction(Movement.NORTH, FuncOp.NO_OP))
    assert "blocked" in events
    assert (ns.agent.x, ns.agent.y) == (6, 6)


def test_attack_reduces_health_by_weapon_damage():
    inv = [(int(Item.STONE_SWORD), 1)] + [(0, 0)] * 8
    s = _hand_crafted_state(entity_kind=EntityKind.COW, inventory=inv)
    ns, _, events = step(s, CompoundAction(Movement.STAY, FuncOp.ATTACK))
    assert "valid_attack:cow" in events
    cow = ns.entities[0]
    assert cow.health == ENTITY_HEALTH[EntityKind.COW] - 5
    assert cow.mode == 1  # passive flees after first hit


def test_kill_emits_hunted_and_removes_entity():
    inv = [(int(Item.STONE_SWORD), 1)] + [(0, 0)] * 8
    s = _hand_crafted_state(entity_kind=EntityKind.COW, inventory=inv)
    events_all = []
    for _ in range(5):
        s, _, ev = step(s, CompoundAction(Movement.STAY, FuncOp.ATTACK))
        events_all += ev
        if not s.entities:
            break
    assert "hunted:cow" in events_all
    assert s.entities == ()


def test_milk_cow_with_bucket():
    inv = [(int(Item.BUCKET), 1)] + [(0, 0)] * 8
    s = _hand_crafted_state(entity_kind=EntityKind.COW, inventory=inv)
    ns, _, events = step(s, CompoundAction(Movement.STAY, FuncOp.USE))
    assert "milked" in events
    items = {k: c for k, c in ns.agent.inventory if c > 0}
    assert items.get(int(Item.MILK)) == 1
    assert int(Item.BUCKET) not in items


def test_conservation_inventory_changes_only_via_events():
    rng = np.random.default_rng(3)
    cfg = WorldConfig(seed=2, size=16, spawn_table=(("cow", 2), ("sheep", 2)))
    s = generate_world(cfg)
    inv = [(int(Item.BUCKET), 1), (int(Item.SHEARS), 1),
           (int(Item.STONE_BLOCK), 3)] + [(0, 0)] * 6
    s = replace(s, agent=replace(s.agent, inventory=tuple(inv)))
    total = sum(c for _, c in s.agent.inventory)
    for _ in range(300):
        a = decode_action(int(rng.integers(273)))
        s, _, events = step(s, a)
        new_total = sum(c for _, c in s.agent.inventory)
        delta = new_total - total
        explained = 0
        for e in events:
            if e.startswith(("harvested:", "milked", "sheared")):
                explained += 1
            elif e.startswith(("dropped:", "destroyed:", "placed:", "ate:")):
                explained -= 1
            elif e.startswith("crafted:"):
                pass  # craft deltas vary by recipe; count them exactly below
        if not any(e.startswith("crafted:") for e in events):
            assert delta == explained, (events, delta)
        total = new_total


def test_health_bounds_and_death_removal():
    rng = np.random.default_rng(4)
    cfg = WorldConfig(seed=9, size=16, spawn_table=(("zombie", 3), ("cow", 2)))
    s = generate_world(cfg)
    for _ in range(400):
        s, _, ev = step(s, decode_action(int(rng.integers(273))))
        assert 0 <= s.agent.health <= AGENT_MAX_HEALTH
        for e in s.entities:
            assert 0 < e.health <= ENTITY_HEALTH[e.kind]
        if s.agent.health == 0:
            break


def test_lidar_matches_bruteforce_oracle():
    rng = np.random.default_rng(11)
    for trial in range(20):
        cfg = WorldConfig(seed=int(rng.integers(1000)), size=16,
                          spawn_table=(("cow", 2), ("spider", 1)))
        s = generate_world(cfg)
        obs = observe(s)
        occ = {(e.x, e.y): int(e.kind) for e in s.entities}
        for r, (dx, dy) in enumerate(OCTANT_OFFSETS):
            k = 1
            while True:
                x, y = s.agent.x + k * dx, s.agent.y + k * dy
                if not (0 <= x < 16 and 0 <= y < 16):
                    expect = (BOUNDARY, k)
                    break
                if (x, y) in occ:
                    expect = (8 + occ[(x, y)], k)
                    break
                if not PASSABLE_MASK[s.grid[y, x]]:
                    expect = (int(s.grid[y, x]), k)
                    break
                k += 1
            assert (obs.lidar_kind[r], obs.lidar_dist[r]) == expect


def test_observe_frame_properties():
    s = _hand_crafted_state()
    obs = observe(s)
    assert obs.frame.shape == (3, 9, 9)
    assert obs.frame.min() >= 0.0 and obs.frame.max() <= 1.0
    # all-grass surroundings: uniform grass color except the agent pixel
    center = obs.frame[:, 4, 4]
    others = np.delete(obs.frame.reshape(3, -1), 4 * 9 + 4, axis=1)
    assert np.all(others == others[:, :1])
    assert not np.array_equal(center, others[:, 0])
    # voxel center equals the tile under the agent
    assert obs.voxel[1, 1] == s.grid[s.agent.y, s.agent.x]


def test_observe_pure():
    s = generate_world(CFG)
    assert obs_equal(observe(s), observe(s))


def test_equipment_color_in_agent_pixel():
    inv = [(int(Item.BUCKET), 1)] + [(0, 0)] * 8
    s = _hand_crafted_state(inventory=inv)
    bare = _hand_crafted_state()
    fa = observe(s).frame[:, 4, 4]
    fb = observe(bare).frame[:, 4, 4]
    assert not np.array_equal(fa, fb)
    np.testing.assert_allclose(fa, ITEM_COLORS[int(Item.BUCKET)], atol=1e-6)


def test_geodesic_distance_helper():
    s = _hand_crafted_state(entity_kind=EntityKind.COW)
    assert geodesic_distance_to_kind(s, EntityKind.COW) == 1.0
    assert math.isinf(geodesic_distance_to_kind(s, EntityKind.SHEEP))


def test_craft_recipe_chain():
    inv = [(int(Item.WOOD), 2)] + [(0, 0)] * 8
    s = _hand_crafted_state(inventory=inv)
    s, _, ev = step(s, CompoundAction(Movement.STAY, FuncOp.CRAFT, 0))
    assert "crafted:plank" in ev
    s, _, ev = step(s, CompoundAction(Movement.STAY, FuncOp.CRAFT, 1))
    assert "crafted:stick" in ev
    s, _, ev = step(s, CompoundAction(Movement.STAY, FuncOp.CRAFT, 0))
    s, _, ev = step(s, CompoundAction(Movement.STAY, FuncOp.CRAFT, 2))
    assert "crafted:wooden_sword" in ev
    items = {k: c for k, c in s.agent.inventory if c > 0}
    assert items.get(int(Item.WOODEN_SWORD)) == 1
