"""Placement/netlist parsing, route-map construction and routing queues."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .grid import BLOCKED, EMPTY, GridCoord, Rect, RouteMap, manhattan
from .techlib import GateModel, Technology, ps_to_fs

ORIENTATIONS = ("R0", "R90", "R180", "R270")
NET_KINDS = ("signal", "clock_tree", "io")
LARGE_FANOUT = 16


class DesignError(ValueError):
    pass


def rotate(u: int, v: int, w: int, h: int, orient: str) -> tuple[int, int]:
    """Rotate a local cell offset counter-clockwise about the footprint.

    The rotated footprint keeps its lower-left corner at the instance
    origin; R90 turns a w x h block into h x w.
    """
    if orient == "R0":
        return u, v
    if orient == "R90":
        return h - 1 - v, u
    if orient == "R180":
        return w - 1 - u, h - 1 - v
    if orient == "R270":
        return v, w - 1 - u
    raise DesignError(f"unknown orientation {orient!r}")


@dataclass(frozen=True)
class GateInstance:
    name: str
    model: GateModel
    origin: tuple[int, int]
    orientation: str = "R0"

    @property
    def size(self) -> tuple[int, int]:
        w, h = self.model.width, self.model.height
        return (h, w) if self.orientation in ("R90", "R270") else (w, h)

    @property
    def rect(self) -> Rect:
        w, h = self.size
        x, y = self.origin
        return Rect(x, y, x + w - 1, y + h - 1)

    def footprint(self) -> list[tuple[int, int]]:
        r = self.rect
        return [(x, y) for y in range(r.y0, r.y1 + 1) for x in range(r.x0, r.x1 + 1)]

    def port_coord(self, port: str) -> GridCoord:
        """Grid node just outside the block edge where ``port`` sits."""
        p = self.model.port(port)
        w, h = self.model.width, self.model.height
        local = {"W": (-1, p.offset), "E": (w, p.offset),
                 "S": (p.offset, -1), "N": (p.offset, h)}[p.side]
        u, v = rotate(*local, w, h, self.orientation)
        return GridCoord(self.origin[0] + u, self.origin[1] + v, 0)


@dataclass(frozen=True)
class Net:
    name: str
    kind: str
    source: tuple[str, str]
    sinks: tuple[tuple[str, str], ...]
    level: int | None = None
    arrival: int = 0  # input arrival time for io nets (fs)

    @property
    def fanout(self) -> int:
        return len(self.sinks)

    @property
    def large(self) -> bool:
        return self.kind == "clock_tree" or self.fanout >= LARGE_FANOUT


@dataclass(frozen=True)
class CoordPair:
    source: GridCoord
    dest: GridCoord
    net: Net
    sink_index: int

    @property
    def key(self) -> tuple[str, int]:
        return (self.net.name, self.sink_index)

    @property
    def rect(self) -> Rect:
        return Rect.around(self.source, self.dest)


@dataclass
class RouteGroup:
    pairs: list[CoordPair]
    bbox: Rect
    large: bool = False


@dataclass
class Design:
    name: str
    width: int
    height: int
    instances: dict[str, GateInstance]
    nets: list[Net]
    tech: Technology = field(repr=False)

    def net(self, name: str) -> Net:
        for n in self.nets:
            if n.name == name:
                return n
        raise KeyError(name)

    def pin(self, endpoint: tuple[str, str]) -> GridCoord:
        inst, port = endpoint
        return self.instances[inst].port_coord(port)

    def pairs(self) -> list[CoordPair]:
        out = []
        for net in self.nets:
            src = self.pin(net.source)
            for i, sink in enumerate(net.sinks):
                out.append(CoordPair(src, self.pin(sink), net, i))
        return out


# ---------------------------------------------------------------------------
# parsing

def _endpoint(text: Any, where: str) -> tuple[str, str]:
    if not isinstance(text, str) or text.count(".") != 1:
        raise DesignError(f"{where}: endpoint must look like 'instance.port', got {text!r}")
    inst, port = text.split(".")
    return inst, port


def parse_placement(text: str) -> dict[str, Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DesignError(f"placement parse error: {exc}") from exc
    if not isinstance(doc, dict) or "instances" not in doc or "grid" not in doc:
        raise DesignError("placement parse error: need 'grid' and 'instances'")
    return doc


def parse_netlist(text: str) -> dict[str, Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DesignError(f"netlist parse error: {exc}") from exc
    if not isinstance(doc, dict) or "nets" not in doc:
        raise DesignError("netlist parse error: need 'nets'")
    return doc


def design_from_docs(placement: Mapping[str, Any], netlist: Mapping[str, Any],
                     tech: Technology) -> Design:
    try:
        width, height = (int(v) for v in placement["grid"])
        instances: dict[str, GateInstance] = {}
        for rec in placement["instances"]:
            name = str(rec["name"])
            if name in instances:
                raise DesignError(f"duplicate instance {name}")
            model = str(rec["model"])
            if model not in tech.gates:
                raise DesignError(f"instance {name}: unknown gate model {model!r}")
            orient = str(rec.get("orient", "R0"))
            if orient not in ORIENTATIONS:
                raise DesignError(f"instance {name}: unknown orientation {orient!r}")
            instances[name] = GateInstance(name, tech.gates[model], (int(rec["x"]), int(rec["y"])), orient)
        nets = []
        seen = set()
        for rec in netlist["nets"]:
            name = str(rec["name"])
            if name in seen:
                raise DesignError(f"duplicate net {name}")
            seen.add(name)
            kind = str(rec.get("kind", "signal"))
            if kind not in NET_KINDS:
                raise DesignError(f"net {name}: unknown kind {kind!r}")
            level = rec.get("level")
            nets.append(Net(
                name=name, kind=kind,
                source=_endpoint(rec["source"], f"net {name}"),
                sinks=tuple(_endpoint(s, f"net {name}") for s in rec["sinks"]),
                level=None if level is None else int(level),
                arrival=ps_to_fs(rec.get("arrival", 0.0)),
            ))
    except KeyError as exc:
        raise DesignError(f"parse error: missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DesignError):
            raise
        raise DesignError(f"parse error: {exc}") from exc
    design = Design(str(placement.get("design", "design")), width, height, instances, nets, tech)
    validate_design(design)
    return design


def load_design(placement_text: str, netlist_text: str, tech: Technology) -> Design:
    return design_from_docs(parse_placement(placement_text), parse_netlist(netlist_text), tech)


def validate_design(design: Design) -> None:
    occupied: dict[tuple[int, int], str] = {}
    for inst in design.instances.values():
        for cell in inst.footprint():
            if cell in occupied:
                raise DesignError(f"overlapping footprints: {occupied[cell]} and {inst.name} at {cell}")
            occupied[cell] = inst.name
    pin_owner: dict[GridCoord, str] = {}
    for net in design.nets:
        if net.fanout < 1:
            raise DesignError(f"net {net.name}: fanout must be >= 1")
        if net.kind == "clock_tree" and net.level is None:
            raise DesignError(f"net {net.name}: clock_tree nets need a level")
        for inst, port in (net.source, *net.sinks):
            if inst not in design.instances:
                raise DesignError(f"net {net.name}: dangling reference to instance {inst!r}")
            try:
                c = design.instances[inst].port_coord(port)
            except KeyError as exc:
                raise DesignError(f"net {net.name}: dangling reference: {exc.args[0]}") from exc
            if (c.x, c.y) in occupied:
                raise DesignError(f"net {net.name}: port {inst}.{port} lands inside {occupied[(c.x, c.y)]}")
            if c in pin_owner and pin_owner[c] != net.name:
                raise DesignError(f"pin node {tuple(c)} shared by nets {pin_owner[c]} and {net.name}")
            pin_owner[c] = net.name


# ---------------------------------------------------------------------------
# route map and queues

def build_route_map(design: Design, tech: Technology | None = None) -> RouteMap:
    """Blocked-area map: gate footprints are state 3 on every JTL layer."""
    tech = tech or design.tech
    rmap = RouteMap(design.width, design.height, tech.layers)
    jtl = [l.index for l in tech.layers if l.jtl_enabled]
    for inst in design.instances.values():
        r = inst.rect
        if r.x0 < 0 or r.y0 < 0 or r.x1 >= design.width or r.y1 >= design.height:
            raise DesignError(f"instance {inst.name} footprint out of grid bounds")
        for layer in jtl:
            rmap.state[layer, r.y0:r.y1 + 1, r.x0:r.x1 + 1] = BLOCKED
    for net in design.nets:
        for ep in (net.source, *net.sinks):
            c = design.pin(ep)
            if not rmap.inside(c):
                raise DesignError(f"net {net.name}: pin {ep[0]}.{ep[1]} outside the grid")
            if rmap.get(c) != EMPTY:
                raise DesignError(f"net {net.name}: pin {ep[0]}.{ep[1]} is blocked")
            rmap.pins[c] = net.name
    return rmap


def cluster_nets(pairs: Iterable[CoordPair], margin: int = 5) -> list[RouteGroup]:
    """Partition pairs by transitive overlap of their margin-expanded boxes.

    Large fan-out (clock) pairs are kept out of the clustering and returned
    as one dedicated group placed first.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    pairs = list(pairs)
    large = [p for p in pairs if p.net.large]
    rest = [p for p in pairs if not p.net.large]
    parent = list(range(len(rest)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    boxes = [p.rect.expand(margin) for p in rest]
    for i in range(len(rest)):
        for j in range(i + 1, len(rest)):
            if boxes[i].intersects(boxes[j]):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    members: dict[int, list[int]] = {}
    for i in range(len(rest)):
        members.setdefault(find(i), []).append(i)
    groups = []
    if large:
        bbox = large[0].rect.expand(margin)
        for p in large[1:]:
            bbox = bbox.union(p.rect.expand(margin))
        groups.append(RouteGroup(large, bbox, large=True))
    clustered = []
    for idx in members.values():
        bbox = boxes[idx[0]]
        for i in idx[1:]:
            bbox = bbox.union(boxes[i])
        clustered.append(RouteGroup([rest[i] for i in idx], bbox))
    # canonical order so that permuting the input gives the same group list
    clustered.sort(key=lambda g: min(p.key for p in g.pairs))
    return groups + clustered


def sort_route_queue(group: RouteGroup | Iterable[CoordPair]) -> list[CoordPair]:
    """Large fan-out first, then fan-out descending, then Manhattan sum descending."""
    pairs = list(group.pairs if isinstance(group, RouteGroup) else group)
    msum: dict[str, int] = {}
    for p in pairs:
        msum[p.net.name] = msum.get(p.net.name, 0) + manhattan(p.source, p.dest)
    return sorted(pairs, key=lambda p: (not p.net.large, -p.net.fanout, -msum[p.net.name]))
