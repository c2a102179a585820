import pytest

from gridcraft.actions import (
    N_ACTIONS, N_FUNCTIONALS, N_MOVEMENTS, CompoundAction, FuncOp, Movement,
    decode_action, encode_action,
)


def test_total_action_count():
    # 7 movements x (4 argless + 8 craft + 9 equip + 9 place + 9 destroy)
    assert N_MOVEMENTS == 7
    assert N_FUNCTIONALS == 39
    assert N_ACTIONS == 273


def test_index_zero_is_stay_noop():
    a = decode_action(0)
    assert a.movement == Movement.STAY
    assert a.func == FuncOp.NO_OP


def test_roundtrip_bijection():
    seen = set()
    for i in range(N_ACTIONS):
        a = decode_action(i)
        assert encode_action(a) == i
        seen.add((a.movement, a.func, a.arg))
    assert len(seen) == N_ACTIONS


def test_movement_major_ordering():
    # the first 39 indices share movement STAY, ordered by functional
    a38 = decode_action(38)
    assert a38.movement == Movement.STAY
    assert a38.func == FuncOp.DESTROY and a38.arg == 8
    a39 = decode_action(39)
    assert a39.movement == Movement.NORTH and a39.func == FuncOp.NO_OP
    # functional ordering: no_op, use, attack, drop, craft0..7, equip0..8
    assert decode_action(1).func == FuncOp.USE
    assert decode_action(2).func == FuncOp.ATTACK
    assert decode_action(3).func == FuncOp.DROP
    assert decode_action(4) == CompoundAction(Movement.STAY, FuncOp.CRAFT, 0)
    assert decode_action(12) == CompoundAction(Movement.STAY, FuncOp.EQUIP, 0)
    assert decode_action(21) == CompoundAction(Movement.STAY, FuncOp.PLACE, 0)
    assert decode_action(30) == CompoundAction(Movement.STAY, FuncOp.DESTROY, 0)


@pytest.mark.parametrize("bad", [-1, 273, 1000])
def test_decode_out_of_range(bad):
    with pytest.raises(ValueError):
        decode_action(bad)


def test_argument_range_enforced():
    with pytest.raises(ValueError):
        CompoundAction(Movement.STAY, FuncOp.CRAFT, 8)
    with pytest.raises(ValueError):
        CompoundAction(Movement.STAY, FuncOp.EQUIP, 9)
    with pytest.raises(ValueError):
        CompoundAction(Movement.STAY, FuncOp.ATTACK, 1)
