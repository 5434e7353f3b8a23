"""Static timing over routed designs.

Every clocked gate gets one clock arrival (fs), computed by walking the
clock distribution nets from the root tap.  Data edges join a clocked
driver to a clocked receiver; the slack formulas below are the usual
hold/setup inequalities with the wire delay as the free variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .design import Design, Net
from .techlib import DelayParams, Technology, WidgetKind, fs_to_ps, widget_delay

GHZ_PER_INV_FS = 1_000_000.0


class InfeasibleWindowError(ValueError):
    def __init__(self, lo: int, hi: int):
        self.lo, self.hi = lo, hi
        super().__init__(f"wire window empty: min {fs_to_ps(lo)} ps > max {fs_to_ps(hi)} ps")


@dataclass(frozen=True)
class Edge:
    """One launch/capture pair; all times in fs."""

    t1: int
    t2: int
    t_delay: int
    t_wire: int
    t_hold: int
    t_setup: int
    driver: str = ""
    receiver: str = ""
    net: str = ""
    sink_index: int = 0


@dataclass(frozen=True)
class InputArc:
    net: str
    sink_index: int
    receiver: str
    t_input: int       # pad arrival time
    t_wire: int
    t_clock: int       # receiver clock arrival

    @property
    def t_arrive(self) -> int:
        return self.t_input + self.t_wire


@dataclass
class TimingGraph:
    edges: list[Edge]
    inputs: list[InputArc]
    clock_arrival: dict[str, int]
    level: dict[str, int]
    library_bound: int

    def edges_into(self, inst: str) -> list[Edge]:
        return [e for e in self.edges if e.receiver == inst]

    def edges_from(self, inst: str) -> list[Edge]:
        return [e for e in self.edges if e.driver == inst]


@dataclass(frozen=True)
class IOReport:
    net: str
    sink_index: int
    receiver: str
    gap: int          # clock arrival minus data arrival (fs)
    regime: str       # "input-first", "boundary" or "violated"

    @property
    def difference(self) -> int:
        return abs(self.gap)

    @property
    def flagged(self) -> bool:
        return self.regime != "input-first"


@dataclass
class SlackReport:
    hold: list[int]
    setup: list[int]
    t_clk: int
    critical: Edge | None
    edges: list[Edge] = field(default_factory=list)

    @property
    def worst_hold(self) -> int:
        return min(self.hold) if self.hold else 0

    @property
    def worst_setup(self) -> int:
        return min(self.setup) if self.setup else 0

    @property
    def hold_violations(self) -> int:
        return sum(1 for s in self.hold if s < 0)

    @property
    def frequency_ghz(self) -> float:
        return frequency_ghz(self.t_clk)

    def to_dict(self) -> dict:
        return {
            "t_clk_ps": fs_to_ps(self.t_clk),
            "frequency_ghz": self.frequency_ghz,
            "worst_hold_slack_ps": fs_to_ps(self.worst_hold),
            "worst_setup_slack_ps": fs_to_ps(self.worst_setup),
            "hold_violations": self.hold_violations,
            "critical_edge": None if self.critical is None else
            [self.critical.driver, self.critical.receiver, self.critical.net],
            "violations": [
                {"driver": e.driver, "receiver": e.receiver, "net": e.net,
                 "sink": e.sink_index, "hold_slack_ps": fs_to_ps(h)}
                for e, h in zip(self.edges, self.hold) if h < 0
            ],
        }


# ---------------------------------------------------------------------------
# primitive formulas

def hold_slack(edge: Edge, graph: TimingGraph | None = None) -> int:
    return edge.t1 + edge.t_delay + edge.t_wire - (edge.t2 + edge.t_hold)


def setup_slack(edge: Edge, graph: TimingGraph | None, t_clk: int) -> int:
    return (edge.t2 + t_clk - edge.t_setup) - (edge.t1 + edge.t_delay + edge.t_wire)


def edge_clock_need(edge: Edge) -> int:
    """Smallest period with non-negative setup slack on this edge."""
    return edge.t1 + edge.t_delay + edge.t_wire - edge.t2 + edge.t_setup


def frequency_ghz(t_clk_fs: int) -> float:
    return GHZ_PER_INV_FS / t_clk_fs if t_clk_fs > 0 else float("inf")


def max_clock(graph: TimingGraph) -> tuple[int, float, Edge | None]:
    """(t_clk fs, GHz, binding edge or None when the library bound binds)."""
    t_clk, crit = graph.library_bound, None
    for e in graph.edges:
        need = edge_clock_need(e)
        if need > t_clk:
            t_clk, crit = need, e
    return t_clk, frequency_ghz(t_clk), crit


def wire_delay_window(edge: Edge, graph: TimingGraph | None, t_clk_target: int) -> tuple[int, int]:
    lo = max(0, edge.t2 + edge.t_hold - edge.t1 - edge.t_delay)
    hi = edge.t2 + t_clk_target - edge.t_setup - edge.t1 - edge.t_delay
    if lo > hi:
        raise InfeasibleWindowError(lo, hi)
    return lo, hi


def io_regime(t_input: int, t_clock: int) -> IOReport:
    gap = t_clock - t_input
    regime = "input-first" if gap > 0 else ("boundary" if gap == 0 else "violated")
    return IOReport("", 0, "", gap, regime)


def io_slack(graph: TimingGraph, input_arrivals: Mapping[str, int] | None = None) -> list[IOReport]:
    """Per input arc: gap between receiver clock and data arrival.

    ``input_arrivals`` overrides pad arrival times by net name.
    """
    out = []
    for arc in graph.inputs:
        t_in = arc.t_input if input_arrivals is None else input_arrivals.get(arc.net, arc.t_input)
        r = io_regime(t_in + arc.t_wire, arc.t_clock)
        out.append(IOReport(arc.net, arc.sink_index, arc.receiver, r.gap, r.regime))
    return out


def path_wire_delay(path, tech: Technology | DelayParams, sink: int | None = None):
    """Wire delay of an annotated path.

    ``path`` is either a sequence of widget kinds (``(kind, fanout)``
    tuples for splitters) or a routed net; for a routed net the per-sink
    delays are returned, or one sink's when ``sink`` is given.
    """
    delays = tech.delays if isinstance(tech, Technology) else tech
    if hasattr(path, "sink_delay"):
        if sink is not None:
            return path.sink_delay(sink, delays)
        return path.recompute_delays(delays)
    total = 0
    for item in path:
        if item is None:
            raise ValueError("unannotated path node")
        kind, fanout = (item if isinstance(item, tuple) else (item, 2))
        total += widget_delay(WidgetKind(kind), 1, delays, fanout)
    return total


def slack_report(graph: TimingGraph, t_clk: int | None = None) -> SlackReport:
    tc, _, crit = max_clock(graph)
    t = tc if t_clk is None else t_clk
    return SlackReport(
        hold=[hold_slack(e) for e in graph.edges],
        setup=[setup_slack(e, graph, t) for e in graph.edges],
        t_clk=tc, critical=crit, edges=list(graph.edges),
    )


# ---------------------------------------------------------------------------
# graph construction

def _is_clock_net(net: Net) -> bool:
    return net.kind == "clock_tree"


def clock_arrivals(design: Design, wire: Mapping[str, Mapping[int, int]]) -> dict[tuple[str, str], int]:
    """Arrival time at every clock port reached by the distribution nets.

    Unclocked distribution cells (taps) forward their input arrival plus
    their own delay to all outputs; a tap with an undriven input is a
    root and starts at 0.
    """
    clock_nets = [n for n in design.nets if _is_clock_net(n)]
    driven_in: dict[str, list[str]] = {}
    for n in clock_nets:
        for inst, port in n.sinks:
            if not design.instances[inst].model.clocked:
                driven_in.setdefault(inst, []).append(port)
    out_time: dict[str, int] = {}
    for n in clock_nets:
        src = n.source[0]
        if src not in driven_in:
            out_time[src] = design.instances[src].model.t_delay
    arrival: dict[tuple[str, str], int] = {}
    pending = list(clock_nets)
    while pending:
        progressed = False
        rest = []
        for n in pending:
            src = n.source[0]
            if src not in out_time:
                rest.append(n)
                continue
            progressed = True
            for i, (inst, port) in enumerate(n.sinks):
                if i not in wire.get(n.name, {}):
                    continue
                t = out_time[src] + wire[n.name][i]
                arrival[(inst, port)] = t
                model = design.instances[inst].model
                if not model.clocked:
                    out_time[inst] = t + model.t_delay
        pending = rest
        if not progressed:
            break
    return arrival


def build_timing_graph(design: Design, wire: Mapping[str, Mapping[int, int]]) -> TimingGraph:
    """``wire`` maps net name -> sink index -> wire delay (fs)."""
    arrival = clock_arrivals(design, wire)
    clock_at: dict[str, int] = {}
    level: dict[str, int] = {}
    for n in design.nets:
        if not _is_clock_net(n):
            continue
        for i, (inst, port) in enumerate(n.sinks):
            model = design.instances[inst].model
            if model.clocked:
                clock_at[inst] = arrival.get((inst, port), 0)
                level[inst] = n.level or 0
            else:
                level.setdefault(inst, n.level or 0)
    for name, inst in design.instances.items():
        if inst.model.clocked:
            clock_at.setdefault(name, 0)
            level.setdefault(name, 0)
    edges: list[Edge] = []
    inputs: list[InputArc] = []
    for n in design.nets:
        if _is_clock_net(n):
            continue
        d_inst = design.instances[n.source[0]]
        for i, (inst, port) in enumerate(n.sinks):
            if i not in wire.get(n.name, {}):
                continue
            r_inst = design.instances[inst]
            if not r_inst.model.clocked:
                continue
            w = wire[n.name][i]
            if d_inst.model.clocked:
                edges.append(Edge(
                    t1=clock_at[d_inst.name], t2=clock_at[inst], t_delay=d_inst.model.t_delay,
                    t_wire=w, t_hold=r_inst.model.t_hold, t_setup=r_inst.model.t_setup,
                    driver=d_inst.name, receiver=inst, net=n.name, sink_index=i))
            else:
                inputs.append(InputArc(n.name, i, inst, n.arrival + d_inst.model.t_delay, w, clock_at[inst]))
    return TimingGraph(edges, inputs, clock_at, level, design.tech.library_bound)


def wire_from_routed(routed: Mapping[str, "object"]) -> dict[str, dict[int, int]]:
    return {name: dict(r.delays) for name, r in routed.items()}


def analyze(design: Design, routed: Mapping[str, "object"]) -> tuple[TimingGraph, SlackReport]:
    g = build_timing_graph(design, wire_from_routed(routed))
    return g, slack_report(g)
