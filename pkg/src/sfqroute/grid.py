"""Grid coordinates, move directions and the multi-layer route map."""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .techlib import LayerSpec

EMPTY, SINGLE, SATURATED, BLOCKED = 0, 1, 2, 3

# axis of the single path occupying a state-1 node; only H/V can be crossed
AXIS_NONE, AXIS_H, AXIS_V, AXIS_X = 0, 1, 2, 3


class GridCoord(NamedTuple):
    x: int
    y: int
    layer: int = 0


OFFSETS = {
    "E": (1, 0, 0),
    "W": (-1, 0, 0),
    "N": (0, 1, 0),
    "S": (0, -1, 0),
    "U": (0, 0, 1),
    "D": (0, 0, -1),
}
PLANAR = ("E", "W", "N", "S")
HORIZONTAL = ("E", "W")
VERTICAL = ("N", "S")
OPPOSITE = {"E": "W", "W": "E", "N": "S", "S": "N", "U": "D", "D": "U"}


def step(c: GridCoord, d: str) -> GridCoord:
    dx, dy, dl = OFFSETS[d]
    return GridCoord(c.x + dx, c.y + dy, c.layer + dl)


def direction(a: GridCoord, b: GridCoord) -> str:
    """Direction of the unit move a -> b."""
    delta = (b.x - a.x, b.y - a.y, b.layer - a.layer)
    for name, off in OFFSETS.items():
        if off == delta:
            return name
    raise ValueError(f"{a} and {b} are not grid-adjacent")


def is_planar(d: str | None) -> bool:
    return d in ("E", "W", "N", "S")


def axis_of(d: str) -> int:
    return AXIS_H if d in HORIZONTAL else AXIS_V


def manhattan(a: GridCoord, b: GridCoord) -> int:
    return abs(a.x - b.x) + abs(a.y - b.y)


class Rect(NamedTuple):
    """Inclusive planar rectangle."""

    x0: int
    y0: int
    x1: int
    y1: int

    def contains(self, c: GridCoord) -> bool:
        return self.x0 <= c.x <= self.x1 and self.y0 <= c.y <= self.y1

    def expand(self, margin: int) -> "Rect":
        return Rect(self.x0 - margin, self.y0 - margin, self.x1 + margin, self.y1 + margin)

    def intersects(self, other: "Rect") -> bool:
        return not (self.x1 < other.x0 or other.x1 < self.x0
                    or self.y1 < other.y0 or other.y1 < self.y0)

    def union(self, other: "Rect") -> "Rect":
        return Rect(min(self.x0, other.x0), min(self.y0, other.y0),
                    max(self.x1, other.x1), max(self.y1, other.y1))

    @property
    def area(self) -> int:
        return (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)

    @classmethod
    def around(cls, *coords: GridCoord) -> "Rect":
        xs = [c.x for c in coords]
        ys = [c.y for c in coords]
        return cls(min(xs), min(ys), max(xs), max(ys))


class RouteMap:
    """Per-layer occupancy grid.

    ``state[layer, y, x]`` holds the node encoding (0 empty, 1 single
    crossable path, 2 saturated, 3 blockage).  ``axis`` records how the
    single path of a state-1 node passes through it so the router knows
    whether a perpendicular JTL cross is legal.  ``pins`` reserves port
    nodes for their net and ``owners`` lists the nets occupying a node.
    """

    def __init__(self, width: int, height: int, layers: Sequence[LayerSpec]):
        self.width = width
        self.height = height
        self.layers = tuple(layers)
        shape = (len(self.layers), height, width)
        self.state = np.zeros(shape, dtype=np.int8)
        self.axis = np.zeros(shape, dtype=np.int8)
        self.pins: dict[GridCoord, str] = {}
        self.owners: dict[GridCoord, list[str]] = {}

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def bounds(self) -> Rect:
        return Rect(0, 0, self.width - 1, self.height - 1)

    def inside(self, c: GridCoord) -> bool:
        return (0 <= c.x < self.width and 0 <= c.y < self.height
                and 0 <= c.layer < len(self.layers))

    def get(self, c: GridCoord) -> int:
        return int(self.state[c.layer, c.y, c.x])

    def set(self, c: GridCoord, value: int, axis: int | None = None) -> None:
        self.state[c.layer, c.y, c.x] = value
        if axis is not None:
            self.axis[c.layer, c.y, c.x] = axis

    def get_axis(self, c: GridCoord) -> int:
        return int(self.axis[c.layer, c.y, c.x])

    def copy(self) -> "RouteMap":
        other = RouteMap.__new__(RouteMap)
        other.width, other.height, other.layers = self.width, self.height, self.layers
        other.state = self.state.copy()
        other.axis = self.axis.copy()
        other.pins = dict(self.pins)
        other.owners = {k: list(v) for k, v in self.owners.items()}
        return other

    def restore(self, snapshot: "RouteMap") -> None:
        self.state[...] = snapshot.state
        self.axis[...] = snapshot.axis
        self.pins = dict(snapshot.pins)
        self.owners = {k: list(v) for k, v in snapshot.owners.items()}

    def same_as(self, other: "RouteMap") -> bool:
        return (np.array_equal(self.state, other.state) and np.array_equal(self.axis, other.axis)
                and self.pins == other.pins and self.owners == other.owners)

    def blocked_count(self) -> int:
        return int((self.state == BLOCKED).sum())
