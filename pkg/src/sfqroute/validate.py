"""Independent checks on routing results.

Nothing here trusts the optimizer's bookkeeping: the map check reads the
route map and trees directly, and the timing recount rebuilds every
wire delay by tracing the emitted script from the design's pins.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .design import Design
from .grid import BLOCKED, EMPTY, SATURATED, SINGLE, GridCoord, RouteMap, direction, is_planar
from .techlib import Technology
from .timing import SlackReport, TimingGraph, build_timing_graph, slack_report
from .tree import RoutedNet
from .widgets import index_widgets, parse_script, trace_net


@dataclass
class MapIssues:
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def add(self, msg: str) -> None:
        self.problems.append(msg)


def _straight(rnet: RoutedNet, c: GridCoord) -> str | None:
    if rnet.parent.get(c) is None:
        return None
    d_in = direction(rnet.parent[c], c)
    outs = rnet.out_dirs(c)
    if len(outs) == 1 and outs[0] == d_in and is_planar(d_in):
        return d_in
    return None


def validate_map(rmap: RouteMap, routed: Mapping[str, RoutedNet]) -> MapIssues:
    """Encoding safety: states stay in 0..2 off blockages, no tree node
    sits on a blockage, and every state-2 node is a splitter or a
    perpendicular cross of two straight passes."""
    issues = MapIssues()
    users: dict[GridCoord, list[str]] = {}
    for name, r in routed.items():
        for c in r.parent:
            users.setdefault(c, []).append(name)
    state = rmap.state
    L, H, W = state.shape
    for l in range(L):
        for y in range(H):
            for x in range(W):
                s = int(state[l, y, x])
                c = GridCoord(x, y, l)
                nets = users.get(c, [])
                if s > BLOCKED or s < EMPTY:
                    issues.add(f"{c}: state {s} out of range")
                elif s == BLOCKED:
                    if nets:
                        issues.add(f"{c}: path of {nets} through a blockage")
                elif s == EMPTY:
                    if nets:
                        issues.add(f"{c}: used by {nets} but marked empty")
                elif s == SINGLE:
                    if len(nets) != 1:
                        issues.add(f"{c}: state 1 with {len(nets)} users")
                elif s == SATURATED:
                    if len(nets) == 1:
                        if len(routed[nets[0]].children(c)) < 2:
                            issues.add(f"{c}: state 2 on a non-splitter node of {nets[0]}")
                    elif len(nets) == 2:
                        dirs = [_straight(routed[n], c) for n in nets]
                        if None in dirs:
                            issues.add(f"{c}: cross with a bent path")
                        elif (dirs[0] in "EW") == (dirs[1] in "EW"):
                            issues.add(f"{c}: cross with parallel paths")
                    else:
                        issues.add(f"{c}: state 2 with {len(nets)} users")
    return issues


def recount_wire(script_text: str, design: Design, tech: Technology) -> dict[str, dict[int, int]]:
    """Per-net, per-sink wire delays traced from the script alone."""
    ws = parse_script(script_text).widgets
    at = index_widgets(ws)
    wire: dict[str, dict[int, int]] = {}
    for net in design.nets:
        src = design.pin(net.source)
        sinks = [design.pin(s) for s in net.sinks]
        if src not in at:
            wire[net.name] = {}
            continue
        wire[net.name] = trace_net(at, src, sinks, tech.delays)
    return wire


def recount_timing(script_text: str, design: Design, tech: Technology) -> tuple[TimingGraph, SlackReport]:
    graph = build_timing_graph(design, recount_wire(script_text, design, tech))
    return graph, slack_report(graph)
