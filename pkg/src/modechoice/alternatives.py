"""Travel mode alternatives and their fixed ordering."""

from __future__ import annotations

from enum import Enum


class Mode(str, Enum):
    CAR = "car"
    BUS = "bus"
    SUBWAY = "subway"
    TRAIN = "train"
    WALK = "walk"
    BICYCLE = "bicycle"
    EMOBILITY = "emobility"

    @classmethod
    def parse(cls, value: "str | Mode") -> "Mode":
        if isinstance(value, Mode):
            return value
        key = str(value).strip().lower()
        aliases = {"sub": "subway", "bike": "bicycle", "emob": "emobility", "e-mobility": "emobility"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown alternative {value!r}") from None


# Column order of every alternative-indexed array; also the tie-breaking order.
MODES: tuple[Mode, ...] = tuple(Mode)
N_ALT = len(MODES)
MODE_INDEX = {m: i for i, m in enumerate(MODES)}

RP_MODES = MODES[:6]
TRANSIT_MODES = (Mode.BUS, Mode.SUBWAY, Mode.TRAIN)
ACTIVE_MODES = (Mode.WALK, Mode.BICYCLE)
ZERO_COST_MODES = ACTIVE_MODES
