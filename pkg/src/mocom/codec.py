"""Message codec: symbols, flight-signal bit layout, and the motion codebook.

A message is framed as 8 symbols: a start flag, 6 payload bits
(direction, 3 heading bits, 2 distance bits, MSB first), and an end flag.
Each non-background symbol is carried by one flight motion primitive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum


class Symbol(Enum):
    START = "start"
    END = "end"
    ONE = "one"
    ZERO = "zero"
    BACKGROUND = "background"


class MotionPrimitive(Enum):
    VERTICAL = "vertical"
    HORIZONTAL = "horizontal"
    LEFT_UP_RIGHT = "left_up_right"
    LEFT_DOWN_RIGHT = "left_down_right"
    PAUSE = "pause"


#: Bijection between message symbols and flight motions. PAUSE and
#: BACKGROUND deliberately have no counterpart.
SYMBOL_TO_PRIMITIVE = {
    Symbol.START: MotionPrimitive.VERTICAL,
    Symbol.END: MotionPrimitive.HORIZONTAL,
    Symbol.ONE: MotionPrimitive.LEFT_UP_RIGHT,
    Symbol.ZERO: MotionPrimitive.LEFT_DOWN_RIGHT,
}
PRIMITIVE_TO_SYMBOL = {p: s for s, p in SYMBOL_TO_PRIMITIVE.items()}

_SYMBOL_CHAR = {
    Symbol.START: "S",
    Symbol.END: "E",
    Symbol.ONE: "1",
    Symbol.ZERO: "0",
    Symbol.BACKGROUND: "B",
}
_CHAR_SYMBOL = {c: s for s, c in _SYMBOL_CHAR.items()}

#: Default physical interpretation of the payload fields. Both are
#: conventions layered on top of the bit layout and can be overridden.
DEFAULT_ANGLE_STEP_DEG = 15.0
DEFAULT_DISTANCE_STEP_M = 0.1

MESSAGE_LENGTH = 8  # start + 1 direction + 3 angle + 2 distance + end


class CodecError(ValueError):
    """Any framing violation; the caller should request retransmission."""


class WrongLengthError(CodecError):
    pass


class MissingStartFlagError(CodecError):
    pass


class MissingEndFlagError(CodecError):
    pass


class InvalidPayloadError(CodecError):
    pass


@dataclass(frozen=True)
class Message:
    """Decoded payload: 1 direction bit, 3 heading bits, 2 distance bits."""

    direction: int  # 0 = forward, 1 = backward
    angle_steps: int  # 0..7, heading = angle_steps * angle step
    distance_code: int  # 0..3

    def __post_init__(self) -> None:
        if self.direction not in (0, 1):
            raise ValueError(f"direction must be 0 or 1, got {self.direction}")
        if not 0 <= self.angle_steps <= 7:
            raise ValueError(f"angle_steps must be in 0..7, got {self.angle_steps}")
        if not 0 <= self.distance_code <= 3:
            raise ValueError(f"distance_code must be in 0..3, got {self.distance_code}")

    def angle_deg(self, step_deg: float = DEFAULT_ANGLE_STEP_DEG) -> float:
        return self.angle_steps * step_deg

    def distance_m(self, step_m: float = DEFAULT_DISTANCE_STEP_M) -> float:
        return (self.distance_code + 1) * step_m

    def to_json(self) -> str:
        return json.dumps(
            {
                "direction": self.direction,
                "angle_steps": self.angle_steps,
                "distance_code": self.distance_code,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Message":
        obj = json.loads(text)
        return cls(
            direction=int(obj["direction"]),
            angle_steps=int(obj["angle_steps"]),
            distance_code=int(obj["distance_code"]),
        )


def _bit(value: int) -> Symbol:
    return Symbol.ONE if value else Symbol.ZERO


def encode(msg: Message) -> list[Symbol]:
    """Frame a message as [start, d, a2, a1, a0, r1, r0, end], MSB first."""
    return [
        Symbol.START,
        _bit(msg.direction),
        _bit((msg.angle_steps >> 2) & 1),
        _bit((msg.angle_steps >> 1) & 1),
        _bit(msg.angle_steps & 1),
        _bit((msg.distance_code >> 1) & 1),
        _bit(msg.distance_code & 1),
        Symbol.END,
    ]


def decode_payload(seq: list[Symbol]) -> Message:
    """Inverse of :func:`encode`. Raises a CodecError subtype per defect."""
    if len(seq) != MESSAGE_LENGTH:
        raise WrongLengthError(
            f"expected {MESSAGE_LENGTH} symbols, got {len(seq)}"
        )
    if seq[0] is not Symbol.START:
        raise MissingStartFlagError(f"sequence does not begin with start: {seq[0]}")
    if seq[-1] is not Symbol.END:
        raise MissingEndFlagError(f"sequence does not end with end: {seq[-1]}")
    bits = []
    for i, sym in enumerate(seq[1:-1], start=1):
        if sym is Symbol.ONE:
            bits.append(1)
        elif sym is Symbol.ZERO:
            bits.append(0)
        else:
            raise InvalidPayloadError(f"payload symbol at index {i} is {sym.value}")
    direction = bits[0]
    angle = (bits[1] << 2) | (bits[2] << 1) | bits[3]
    distance = (bits[4] << 1) | bits[5]
    return Message(direction=direction, angle_steps=angle, distance_code=distance)


def symbol_to_primitive(sym: Symbol) -> MotionPrimitive:
    if sym is Symbol.BACKGROUND:
        raise ValueError("background carries no motion primitive")
    return SYMBOL_TO_PRIMITIVE[sym]


def primitive_to_symbol(prim: MotionPrimitive) -> Symbol:
    if prim is MotionPrimitive.PAUSE:
        raise ValueError("pause carries no symbol")
    return PRIMITIVE_TO_SYMBOL[prim]


def render_symbols(seq: list[Symbol]) -> str:
    """Compact string form, e.g. [start,0,0,0,0,1,0,end] -> 'S000010E'."""
    return "".join(_SYMBOL_CHAR[s] for s in seq)


def parse_symbols(text: str) -> list[Symbol]:
    try:
        return [_CHAR_SYMBOL[c] for c in text]
    except KeyError as exc:
        raise ValueError(f"unknown symbol character {exc.args[0]!r}") from None


def all_messages() -> list[Message]:
    """The full 64-message space (for exhaustive checks)."""
    return [
        Message(d, a, r)
        for d in range(2)
        for a in range(8)
        for r in range(4)
    ]
