"""Modified A* search over the multi-layer route map.

The cost is ``f = g + h + c + l``: unit move cost, Manhattan estimate,
corner penalty and layer penalty.  Corner and layer terms are scaled by
``TIE`` so they only ever decide between paths of equal length; path
length stays optimal under the movement rules.

Search states are (node, entry direction) pairs, because both the corner
penalty and the cross rule depend on how a node was entered.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .grid import (AXIS_H, AXIS_V, AXIS_X, HORIZONTAL, SINGLE, VERTICAL, GridCoord, Rect, RouteMap,
                   direction, is_planar, manhattan, step)

TIE = 2.0 ** -16
STEP_COST = 1.0
CORNER_COST = 2.0 * TIE
LAYER_NODE_COST = 0.5 * TIE
VIA_COST = 2.0 * TIE  # per layer transition, 4.0 * TIE per via pair
BOUND_MARGIN = 4


@dataclass(frozen=True)
class SearchBound:
    rect: Rect

    @classmethod
    def for_pair(cls, source: GridCoord, dest: GridCoord, rmap: RouteMap,
                 margin: int = BOUND_MARGIN) -> "SearchBound":
        r = Rect.around(source, dest).expand(margin)
        return cls(Rect(max(r.x0, 0), max(r.y0, 0),
                        min(r.x1, rmap.width - 1), min(r.y1, rmap.height - 1)))

    @classmethod
    def whole(cls, rmap: RouteMap) -> "SearchBound":
        return cls(rmap.bounds)

    def contains(self, c: GridCoord) -> bool:
        return self.rect.contains(c)


@dataclass(eq=False)
class SearchNode:
    coord: GridCoord
    g: float = 0.0
    h: float = 0.0
    c: float = 0.0
    l: float = 0.0
    pre: "SearchNode | None" = None
    entry: str | None = None

    @property
    def f(self) -> float:
        return self.g + self.h + self.c + self.l

    @property
    def pre_loc(self) -> GridCoord | None:
        return self.pre.coord if self.pre else None


@dataclass
class Path:
    coords: list[GridCoord]
    net: str | None = None
    sink_index: int | None = None
    roles: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.roles:
            self.roles = geometric_roles(self.coords)

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def corners(self) -> int:
        return self.roles.count("corner")

    @property
    def length(self) -> int:
        """Number of unit moves."""
        return max(0, len(self.coords) - 1)


def geometric_roles(coords: Sequence[GridCoord]) -> list[str]:
    """plain / corner / via per node from the path shape alone."""
    roles = []
    n = len(coords)
    for i, c in enumerate(coords):
        d_in = direction(coords[i - 1], c) if i > 0 else None
        d_out = direction(c, coords[i + 1]) if i + 1 < n else None
        if c.layer > 0 and ((d_in and not is_planar(d_in)) or (d_out and not is_planar(d_out))):
            roles.append("via")
        elif is_planar(d_in) and is_planar(d_out) and d_in != d_out:
            roles.append("corner")
        else:
            roles.append("plain")
    return roles


def _offsets(curr: SearchNode, rmap: RouteMap, ptl_channel_open: bool, msl_only: bool) -> list[str]:
    c = curr.coord
    layer = rmap.layers[c.layer]
    if layer.jtl_enabled:
        if msl_only:
            return ["U", "D"]
        if rmap.get(c) == SINGLE and is_planar(curr.entry):
            # crossing another path: straight through only
            return [curr.entry]
        planar = ["N", "S", "E", "W"] if curr.g > 4 else ["E", "W", "N", "S"]
        return planar + ["U", "D"] if ptl_channel_open else planar
    planar = ["N", "S"] if c.layer % 2 else ["E", "W"]
    return planar + ["U", "D"]


def enterable(rmap: RouteMap, move: str, nxt: GridCoord, bound: SearchBound,
              dest: GridCoord | None, blocked: frozenset | set = frozenset()) -> bool:
    if not rmap.inside(nxt) or not bound.contains(nxt) or nxt in blocked:
        return False
    if nxt != dest and nxt in rmap.pins:
        return False
    s = rmap.get(nxt)
    if s == 0:
        return True
    if nxt == dest:
        # only a re-route back onto the net's own plain node lands on state 1
        return s == SINGLE and rmap.get_axis(nxt) != AXIS_X
    if s != SINGLE or not is_planar(move):
        return False
    if not rmap.layers[nxt.layer].jtl_enabled:
        return False
    ax = rmap.get_axis(nxt)
    return (ax == AXIS_H and move in VERTICAL) or (ax == AXIS_V and move in HORIZONTAL)


def adjacent_positions(curr: SearchNode, bound: SearchBound, rmap: RouteMap, *,
                       ptl_channel_open: bool = False, dest: GridCoord | None = None,
                       msl_only: bool = False, blocked: frozenset | set = frozenset()
                       ) -> list[GridCoord]:
    """Legal next nodes from ``curr`` in deterministic offset order."""
    out = []
    for d in _offsets(curr, rmap, ptl_channel_open, msl_only):
        nxt = step(curr.coord, d)
        if enterable(rmap, d, nxt, bound, dest, blocked):
            out.append(nxt)
    return out


def astar_route(source: GridCoord | None, dest: GridCoord, rmap: RouteMap,
                bound: SearchBound | None = None, *, ptl_channel_open: bool = False,
                msl_only: bool = False, sources: Iterable[GridCoord] | None = None,
                blocked: frozenset | set = frozenset()) -> Path | None:
    """Route ``source`` -> ``dest``; returns None when the open list runs dry.

    ``sources`` turns this into a multi-source search (used to attach a
    branch anywhere on an existing tree).  The map is never modified.
    """
    starts = list(sources) if sources is not None else [source]
    if bound is None:
        bound = SearchBound.for_pair(starts[0], dest, rmap)
    if dest in starts:
        return Path([dest])
    seq = itertools.count()
    heap: list = []
    best: dict = {}
    for s in starts:
        node = SearchNode(s, h=float(manhattan(s, dest)))
        best[(s, None)] = 0.0
        heapq.heappush(heap, (node.f, node.h, next(seq), node))
    closed = set()
    while heap:
        _, _, _, curr = heapq.heappop(heap)
        key = (curr.coord, curr.entry)
        if key in closed:
            continue
        if curr.coord == dest:
            coords = []
            n: SearchNode | None = curr
            while n is not None:
                coords.append(n.coord)
                n = n.pre
            coords.reverse()
            return Path(coords)
        closed.add(key)
        for nxt in adjacent_positions(curr, bound, rmap, ptl_channel_open=ptl_channel_open,
                                      dest=dest, msl_only=msl_only, blocked=blocked):
            move = direction(curr.coord, nxt)
            nkey = (nxt, move)
            if nkey in closed:
                continue
            g = curr.g + STEP_COST
            c = curr.c
            if is_planar(move) and is_planar(curr.entry) and move != curr.entry:
                c += CORNER_COST
            l = curr.l
            if nxt.layer > 0:
                l += LAYER_NODE_COST
            if not is_planar(move):
                l += VIA_COST
            cost = g + c + l
            if best.get(nkey, float("inf")) <= cost:
                continue
            best[nkey] = cost
            node = SearchNode(nxt, g, float(manhattan(nxt, dest)), c, l, curr, move)
            heapq.heappush(heap, (node.f, node.h, next(seq), node))
    return None
