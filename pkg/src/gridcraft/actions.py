"""Compound action space: one movement plus one functional action per step.

Flat encoding is movement-major with functionals ordered
(no_op, use, attack, drop, craft 0-7, equip 0-8, place 0-8, destroy 0-8),
giving 7 * 39 = 273 discrete actions.
"""

from dataclasses import dataclass
from enum import IntEnum

from gridcraft.constants import INVENTORY_SLOTS, N_RECIPES


class Movement(IntEnum):
    STAY = 0
    NORTH = 1
    SOUTH = 2
    EAST = 3
    WEST = 4
    TURN_LEFT = 5
    TURN_RIGHT = 6


class FuncOp(IntEnum):
    NO_OP = 0
    USE = 1
    ATTACK = 2
    DROP = 3
    CRAFT = 4
    EQUIP = 5
    PLACE = 6
    DESTROY = 7


_ARGLESS = (FuncOp.NO_OP, FuncOp.USE, FuncOp.ATTACK, FuncOp.DROP)
_ARG_COUNTS = {FuncOp.CRAFT: N_RECIPES, FuncOp.EQUIP: INVENTORY_SLOTS,
               FuncOp.PLACE: INVENTORY_SLOTS, FuncOp.DESTROY: INVENTORY_SLOTS}

N_MOVEMENTS = len(Movement)
N_FUNCTIONALS = len(_ARGLESS) + sum(_ARG_COUNTS.values())  # 39
N_ACTIONS = N_MOVEMENTS * N_FUNCTIONALS  # 273

# Functional sub-index table, in the declared order.
_FUNC_TABLE: list[tuple[FuncOp, int]] = [(op, 0) for op in _ARGLESS]
for _op in (FuncOp.CRAFT, FuncOp.EQUIP, FuncOp.PLACE, FuncOp.DESTROY):
    _FUNC_TABLE.extend((_op, a) for a in range(_ARG_COUNTS[_op]))
_FUNC_INDEX = {fa: i for i, fa in enumerate(_FUNC_TABLE)}


@dataclass(frozen=True)
class CompoundAction:
    movement: Movement
    func: FuncOp
    arg: int = 0

    def __post_init__(self):
        if self.func in _ARGLESS:
            if self.arg != 0:
                raise ValueError(f"{self.func.name} takes no argument")
        elif not 0 <= self.arg < _ARG_COUNTS[self.func]:
            raise ValueError(f"{self.func.name} argument {self.arg} out of range")


NO_OP_ACTION = CompoundAction(Movement.STAY, FuncOp.NO_OP)


def encode_action(action: CompoundAction) -> int:
    return int(action.movement) * N_FUNCTIONALS + _FUNC_INDEX[(action.func, action.arg)]


def decode_action(index: int) -> CompoundAction:
    if not 0 <= index < N_ACTIONS:
        raise ValueError(f"action index {index} outside [0, {N_ACTIONS})")
    func, arg = _FUNC_TABLE[index % N_FUNCTIONALS]
    return CompoundAction(Movement(index // N_FUNCTIONALS), func, arg)
