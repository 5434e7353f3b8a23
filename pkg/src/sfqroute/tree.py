"""Routed net trees: geometry, per-node widget kinds and per-sink delays."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .design import Net
from .grid import (AXIS_H, AXIS_V, AXIS_X, EMPTY, HORIZONTAL, SATURATED, SINGLE, VERTICAL,
                   GridCoord, RouteMap, direction, is_planar)
from .techlib import JTL_KINDS, DelayParams, Technology, WidgetKind, widget_delay

_DIR_ORDER = {"E": 0, "W": 1, "N": 2, "S": 3, "U": 4, "D": 5}
UNCHANGEABLE = frozenset({WidgetKind.SPLITTER, WidgetKind.CROSS, WidgetKind.DRIVER,
                          WidgetKind.RECEIVER, WidgetKind.MSL, WidgetKind.VIA})


@dataclass
class Segment:
    """Chain of tree nodes between splitters/endpoints.

    ``label`` is the sorted tuple of sink indices reached through it.
    """

    label: tuple[int, ...]
    nodes: list[GridCoord]

    @property
    def order_key(self) -> tuple[int, int]:
        return (len(self.label), min(self.label))


@dataclass
class RoutedNet:
    net: Net
    source: GridCoord
    sinks: list[GridCoord]
    parent: dict[GridCoord, GridCoord | None] = field(default_factory=dict)
    kind: dict[GridCoord, WidgetKind] = field(default_factory=dict)
    failed: list[int] = field(default_factory=list)
    delays: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.parent:
            self.parent = {self.source: None}
        self._cache = None

    # -- structure ---------------------------------------------------------
    def touch(self) -> None:
        self._cache = None

    def _build_cache(self):
        children: dict[GridCoord, list[GridCoord]] = {c: [] for c in self.parent}
        for c, p in self.parent.items():
            if p is not None:
                children[p].append(c)
        for c, ch in children.items():
            ch.sort(key=lambda n: _DIR_ORDER[direction(c, n)])
        sink_of: dict[GridCoord, list[int]] = {}
        for i, s in enumerate(self.sinks):
            if i not in self.failed and s in self.parent:
                sink_of.setdefault(s, []).append(i)
        order = []
        stack = [self.source]
        while stack:
            c = stack.pop()
            order.append(c)
            stack.extend(reversed(children[c]))
        below: dict[GridCoord, tuple[int, ...]] = {}
        for c in reversed(order):
            acc = list(sink_of.get(c, []))
            for ch in children[c]:
                acc.extend(below[ch])
            below[c] = tuple(sorted(acc))
        self._cache = (children, order, below)

    @property
    def _c(self):
        if self._cache is None:
            self._build_cache()
        return self._cache

    def children(self, c: GridCoord) -> list[GridCoord]:
        return self._c[0][c]

    def nodes(self) -> list[GridCoord]:
        """Depth-first preorder from the source (deterministic)."""
        return self._c[1]

    def sinks_below(self, c: GridCoord) -> tuple[int, ...]:
        return self._c[2][c]

    @property
    def routed_sinks(self) -> list[int]:
        return [i for i in range(len(self.sinks)) if i not in self.failed]

    def in_dir(self, c: GridCoord) -> str | None:
        p = self.parent[c]
        return None if p is None else direction(p, c)

    def out_dirs(self, c: GridCoord) -> list[str]:
        return [direction(c, ch) for ch in self.children(c)]

    def is_straight(self, c: GridCoord) -> bool:
        d_in, outs = self.in_dir(c), self.out_dirs(c)
        return is_planar(d_in) and len(outs) == 1 and outs[0] == d_in

    def sink_path(self, i: int) -> list[GridCoord]:
        c = self.sinks[i]
        out = []
        while c is not None:
            out.append(c)
            c = self.parent[c]
        out.reverse()
        return out

    def add_path(self, coords: Sequence[GridCoord]) -> None:
        """Graft a path whose first node is already in the tree."""
        if coords[0] not in self.parent:
            raise ValueError("path must start on the tree")
        for a, b in zip(coords, coords[1:]):
            if b in self.parent:
                raise ValueError(f"node {b} already in tree")
            self.parent[b] = a
        self.touch()

    def is_pin(self, c: GridCoord) -> bool:
        return c == self.source or c in self.sinks

    def segments(self) -> list[Segment]:
        """Segments sorted leaf-first by label size, then smallest sink index."""
        segs = []
        starts = [self.source]
        while starts:
            s = starts.pop()
            nodes = [s]
            c = s
            while len(self.children(c)) == 1:
                c = self.children(c)[0]
                nodes.append(c)
            label = self.sinks_below(s)
            if label:
                segs.append(Segment(label, nodes))
            starts.extend(reversed(self.children(c)))
        segs.sort(key=lambda sg: sg.order_key)
        return segs

    def segment_for(self, label: tuple[int, ...]) -> Segment | None:
        for seg in self.segments():
            if seg.label == label:
                return seg
        return None

    # -- delays ------------------------------------------------------------
    def node_delay(self, c: GridCoord, delays: DelayParams) -> int:
        k = self.kind.get(c, WidgetKind.JTL2)
        return widget_delay(k, 1, delays, fanout=len(self.children(c)))

    def sink_delay(self, i: int, delays: DelayParams) -> int:
        """Full recomputation of the wire delay to sink ``i``."""
        if self.sinks[i] == self.source:
            return 0
        return sum(self.node_delay(c, delays) for c in self.sink_path(i))

    def recompute_delays(self, delays: DelayParams) -> dict[int, int]:
        return {i: self.sink_delay(i, delays) for i in self.routed_sinks}

    def refresh_delays(self, delays: DelayParams) -> None:
        self.delays = self.recompute_delays(delays)

    def set_kind(self, c: GridCoord, new: WidgetKind, delays: DelayParams) -> int:
        """Change one node's widget and update sink delays incrementally."""
        old_d = self.node_delay(c, delays)
        self.kind[c] = new
        delta = self.node_delay(c, delays) - old_d
        if delta:
            for i in self.sinks_below(c):
                if self.sinks[i] != self.source:
                    self.delays[i] += delta
        return delta

    def changeable(self, c: GridCoord) -> bool:
        return self.kind.get(c, WidgetKind.JTL2) not in UNCHANGEABLE

    def planar_steps(self) -> int:
        return sum(1 for c, p in self.parent.items()
                   if p is not None and (c.x, c.y) != (p.x, p.y))

    def copy(self) -> "RoutedNet":
        other = RoutedNet(self.net, self.source, list(self.sinks), dict(self.parent),
                          dict(self.kind), list(self.failed), dict(self.delays))
        return other


def node_axis(rnet: RoutedNet, c: GridCoord) -> int:
    d_in, outs = rnet.in_dir(c), rnet.out_dirs(c)
    if len(outs) == 1 and d_in == outs[0]:
        if d_in in HORIZONTAL:
            return AXIS_H
        if d_in in VERTICAL:
            return AXIS_V
    return AXIS_X


def encode_tree(rnet: RoutedNet, rmap: RouteMap, nodes: Iterable[GridCoord] | None = None) -> None:
    """Write a routed tree's node states into the map.

    plain node 0 -> 1, crossing an existing straight path 1 -> 2,
    splitter node -> 2.
    """
    for c in (rnet.nodes() if nodes is None else nodes):
        s = rmap.get(c)
        rmap.owners.setdefault(c, []).append(rnet.net.name)
        if s == SINGLE:
            rmap.set(c, SATURATED)
        elif s == EMPTY:
            if len(rnet.children(c)) >= 2:
                rmap.set(c, SATURATED, AXIS_X)
            else:
                rmap.set(c, SINGLE, node_axis(rnet, c))
        else:
            raise ValueError(f"cannot encode node {c} with state {s}")


def unencode_node(rnet: RoutedNet, rmap: RouteMap, c: GridCoord) -> None:
    owners = rmap.owners.get(c, [])
    owners.remove(rnet.net.name)
    if not owners:
        rmap.owners.pop(c, None)
        rmap.set(c, EMPTY, 0)
    else:
        rmap.set(c, SINGLE)


def annotate_kinds(rnet: RoutedNet, rmap: RouteMap, tech: Technology) -> None:
    """Initial widget kinds after global routing (all standard 2-JJ JTLs)."""
    kind: dict[GridCoord, WidgetKind] = {}
    ptl_only = {l.index for l in tech.layers if l.ptl_only}
    for c in rnet.nodes():
        d_in = rnet.in_dir(c)
        outs = rnet.out_dirs(c)
        vertical = (d_in is not None and not is_planar(d_in)) or any(not is_planar(d) for d in outs)
        if len(rmap.owners.get(c, ())) >= 2:
            kind[c] = WidgetKind.CROSS
        elif len(outs) >= 2:
            kind[c] = WidgetKind.SPLITTER
        elif c.layer > 0 and vertical:
            kind[c] = WidgetKind.VIA
        elif c.layer in ptl_only:
            kind[c] = WidgetKind.MSL
        else:
            kind[c] = WidgetKind.JTL2
    # PTL excursions need a driver before and a receiver after
    for c in rnet.nodes():
        if kind[c] is WidgetKind.MSL and kind.get(rnet.parent[c]) is WidgetKind.VIA:
            p = rnet.parent[c]
            while p is not None and kind[p] is WidgetKind.VIA:
                p = rnet.parent[p]
            if p is None or kind[p] not in JTL_KINDS:
                raise ValueError(f"PTL run at {c} has no place for a driver")
            kind[p] = WidgetKind.DRIVER
        if kind[c] is WidgetKind.MSL:
            chs = rnet.children(c)
            if len(chs) == 1 and kind[chs[0]] is WidgetKind.VIA:
                n = chs[0]
                while kind[n] is WidgetKind.VIA and len(rnet.children(n)) == 1:
                    n = rnet.children(n)[0]
                if kind[n] not in JTL_KINDS:
                    raise ValueError(f"PTL run at {c} has no place for a receiver")
                kind[n] = WidgetKind.RECEIVER
    rnet.kind = kind
