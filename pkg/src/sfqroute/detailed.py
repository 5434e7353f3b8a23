"""Timing-driven widget substitution on globally routed nets.

Routing geometry is kept; only widget kinds change, except for PTL
substitution on a four-layer stack, where the interior of a straight
run is lifted onto a passive-only layer.  The flow runs four phases:

I    balance every clock sub-tree (lengthen short branches),
II   per signal net: fix hold by junction upgrades, then shorten,
III  clock retiming: bridges between levels, then per-instance branches,
IV   input-stage adjustment.

Every change goes through :class:`DetailedState`, which keeps the
per-sink delays incrementally and appends to the substitution log.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .astar import SearchBound, astar_route
from .design import Design
from .grid import AXIS_X, SINGLE, GridCoord, RouteMap
from .techlib import (JTL_KINDS, UPGRADE, Technology, WidgetKind,
                      ptl_breakeven_length, widget_delay)
from .timing import (TimingGraph, build_timing_graph, edge_clock_need, hold_slack,
                     io_slack, max_clock)
from .tree import RoutedNet, Segment, unencode_node

LOG_HEADER = "seq\tphase\tnet\tlayer\tx\ty\told\tnew\tdelta_fs"


@dataclass
class OptimizerConfig:
    rng_seed: int = 0
    max_passes: int = 4
    allow_ptl_on_jtl_layers: bool = True
    enable_io_opt: bool = True


@dataclass(frozen=True)
class Substitution:
    phase: str
    net: str
    coord: GridCoord
    old: str
    new: str
    delta: int

    def tsv(self, seq: int) -> str:
        c = self.coord
        return f"{seq}\t{self.phase}\t{self.net}\t{c.layer}\t{c.x}\t{c.y}\t{self.old}\t{self.new}\t{self.delta}"


def format_log(subs: Sequence[Substitution]) -> str:
    return "\n".join([LOG_HEADER] + [s.tsv(i) for i, s in enumerate(subs)]) + "\n"


def net_rng(seed: int, tag: str, net: str) -> random.Random:
    return random.Random(f"{seed}/{tag}/{net}")


# ---------------------------------------------------------------------------
# residues

@dataclass
class ResidueTable:
    """Per-sink wire-delay targets of one net.

    ``lo`` is the smallest admissible delay (hold side); ``hi`` optionally
    caps lengthening.  Sinks missing from ``lo`` are unconstrained.
    """

    rnet: RoutedNet
    lo: dict[int, int]
    hi: dict[int, int] = field(default_factory=dict)

    def hold_residue(self, i: int) -> int:
        return self.rnet.delays[i] - self.lo[i]

    def headroom(self, i: int) -> int:
        return max(0, self.hold_residue(i))

    def ok(self) -> bool:
        return all(self.hold_residue(i) >= 0 for i in self.lo)

    def violating(self, label: Iterable[int]) -> bool:
        return any(i in self.lo and self.hold_residue(i) < 0 for i in label)

    def fits(self, label: Iterable[int], delta: int) -> bool:
        return all(self.rnet.delays[i] + delta <= self.hi[i] for i in label if i in self.hi)

    def reduction_bound(self, label: Iterable[int]) -> int:
        vals = [self.hold_residue(i) for i in label if i in self.lo]
        return min(vals) if vals else 0

    def shortfall(self) -> dict[int, int]:
        return {i: -self.hold_residue(i) for i in sorted(self.lo) if self.hold_residue(i) < 0}


# ---------------------------------------------------------------------------
# design state

class DetailedState:
    def __init__(self, design: Design, rmap: RouteMap, routed: dict[str, RoutedNet],
                 tech: Technology | None = None, cfg: OptimizerConfig | None = None):
        self.design = design
        self.tech = tech or design.tech
        self.rmap = rmap
        self.routed = routed
        self.cfg = cfg or OptimizerConfig()
        self.log: list[Substitution] = []

    @property
    def delays(self):
        return self.tech.delays

    def wire(self) -> dict[str, dict[int, int]]:
        return {name: dict(r.delays) for name, r in self.routed.items()}

    def graph(self) -> TimingGraph:
        return build_timing_graph(self.design, self.wire())

    def score(self) -> tuple[int, int]:
        """(hold violations, t_clk) of the current assignment."""
        g = self.graph()
        return sum(1 for e in g.edges if hold_slack(e) < 0), max_clock(g)[0]

    def snapshot(self):
        return ({k: r.copy() for k, r in self.routed.items()}, self.rmap.copy(), len(self.log))

    def restore(self, snap) -> None:
        routed, rmap, n = snap
        self.routed.clear()
        self.routed.update({k: r.copy() for k, r in routed.items()})
        self.rmap.restore(rmap)
        del self.log[n:]

    # -- primitive edits ---------------------------------------------------
    def set_kind(self, rnet: RoutedNet, c: GridCoord, new: WidgetKind, phase: str) -> int:
        old = rnet.kind[c]
        delta = rnet.set_kind(c, new, self.delays)
        self.log.append(Substitution(phase, rnet.net.name, c, old.value, new.value, delta))
        return delta


# ---------------------------------------------------------------------------
# segment operations

def segment_order(rnet: RoutedNet) -> list[Segment]:
    return rnet.segments()


def fix_hold(state: DetailedState, rnet: RoutedNet, res: ResidueTable, *, phase: str = "II",
             rng: random.Random | None = None) -> dict[int, int]:
    """Raise junction counts until every ``lo`` target is met.

    Nodes are visited segment by segment (leaves first) in seeded random
    order; a node is only touched while some sink below it is still short
    and the ``hi`` caps allow it.  Returns the per-sink shortfall left.
    """
    rng = rng or net_rng(state.cfg.rng_seed, phase + "-hold", rnet.net.name)
    for _ in range(state.cfg.max_passes):
        if res.ok():
            break
        changed = False
        for seg in rnet.segments():
            if res.ok():
                break
            if not res.violating(seg.label):
                continue
            cands = [c for c in seg.nodes if rnet.changeable(c) and rnet.kind[c] in UPGRADE]
            rng.shuffle(cands)
            for c in cands:
                if not res.violating(seg.label):
                    break
                new = UPGRADE[rnet.kind[c]]
                step = state.delays.per_unit(new) - state.delays.per_unit(rnet.kind[c])
                if not res.fits(seg.label, step):
                    continue
                state.set_kind(rnet, c, new, phase)
                changed = True
        if not changed:
            break
    return res.shortfall()


def _straight_runs(rnet: RoutedNet, seg: Segment, ok) -> list[list[GridCoord]]:
    runs, cur = [], []
    for c in seg.nodes:
        if ok(c) and not rnet.is_pin(c) and rnet.is_straight(c):
            cur.append(c)
        else:
            if cur:
                runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    return runs


def _ptl_inplace_delay(m: int, state: DetailedState) -> int:
    d = state.delays
    return d.t_drv + d.t_rec + (m - 2) * d.t_msl


def _reroute_ptl(state: DetailedState, rnet: RoutedNet, sub: list[GridCoord], phase: str,
                 budget: int) -> int | None:
    """Lift the interior of ``sub`` onto a passive-only layer.  Returns the
    delay reduction, or None when no legal, profitable route exists."""
    rmap = state.rmap
    a, b = sub[0], sub[-1]
    bound = SearchBound.for_pair(a, b, rmap)
    interior = set(sub[1:-1])
    path = astar_route(a, b, rmap, bound, msl_only=True, blocked=interior)
    if path is None or len(path.coords) < 3:
        return None
    chain = path.coords[1:-1]
    if not any(rmap.layers[c.layer].ptl_only for c in chain):
        return None
    kinds = {}
    for i, c in enumerate(chain):
        prev = path.coords[i]
        nxt = path.coords[i + 2]
        vertical = (prev.x, prev.y) == (c.x, c.y) or (nxt.x, nxt.y) == (c.x, c.y)
        kinds[c] = WidgetKind.VIA if vertical else WidgetKind.MSL
    d = state.delays
    old = sum(rnet.node_delay(c, d) for c in sub)
    new = d.t_drv + d.t_rec + sum(widget_delay(k, 1, d) for k in kinds.values())
    reduction = old - new
    if reduction <= 0 or reduction > budget:
        return None
    label = rnet.sinks_below(a)
    name = rnet.net.name
    for c in sub[1:-1]:
        state.log.append(Substitution(phase, name, c, rnet.kind[c].value, "-", -rnet.node_delay(c, d)))
        unencode_node(rnet, rmap, c)
        del rnet.parent[c]
        rnet.kind.pop(c, None)
    prev = a
    for c in chain:
        rnet.parent[c] = prev
        rnet.kind[c] = kinds[c]
        rmap.owners.setdefault(c, []).append(name)
        rmap.set(c, SINGLE, AXIS_X)
        state.log.append(Substitution(phase, name, c, "-", kinds[c].value, widget_delay(kinds[c], 1, d)))
        prev = c
    rnet.parent[b] = prev
    rnet.touch()
    for c, k in ((a, WidgetKind.DRIVER), (b, WidgetKind.RECEIVER)):
        old_d = widget_delay(rnet.kind[c], 1, d)
        state.log.append(Substitution(phase, name, c, rnet.kind[c].value, k.value, widget_delay(k, 1, d) - old_d))
        rnet.kind[c] = k
        rmap.set(c, rmap.get(c), AXIS_X)
    for i in label:
        rnet.delays[i] -= reduction
    return reduction


def _try_ptl(state: DetailedState, rnet: RoutedNet, seg: Segment, budget: int, phase: str,
             rng: random.Random) -> int:
    tech, d = state.tech, state.delays
    if not tech.has_ptl or d.l_drv != 1 or d.l_rec != 1:
        return 0
    brk = ptl_breakeven_length(d)
    runs = _straight_runs(rnet, seg, lambda c: rnet.kind[c] in JTL_KINDS)
    runs = [r for r in runs if len(r) >= brk]
    rng.shuffle(runs)
    for run in runs:
        for m in range(len(run), brk - 1, -1):
            starts = list(range(len(run) - m + 1))
            rng.shuffle(starts)
            for s in starts:
                sub = run[s:s + m]
                old = sum(rnet.node_delay(c, d) for c in sub)
                reduction = old - _ptl_inplace_delay(m, state)
                if reduction <= 0 or reduction > budget:
                    continue
                if tech.ptl_only_layers:
                    got = _reroute_ptl(state, rnet, sub, phase, budget)
                    if got:
                        return got
                layer = tech.layers[sub[0].layer]
                if state.cfg.allow_ptl_on_jtl_layers and layer.ptl_enabled:
                    state.set_kind(rnet, sub[0], WidgetKind.DRIVER, phase)
                    for c in sub[1:-1]:
                        state.set_kind(rnet, c, WidgetKind.MSL, phase)
                    state.set_kind(rnet, sub[-1], WidgetKind.RECEIVER, phase)
                    for c in sub:
                        state.rmap.set(c, state.rmap.get(c), AXIS_X)
                    return reduction
    return 0


def _try_longjtl(state: DetailedState, rnet: RoutedNet, seg: Segment, budget: int, phase: str,
                 rng: random.Random) -> int:
    d = state.delays
    long_ = WidgetKind.LONGJTL
    done = 0
    runs = _straight_runs(rnet, seg, lambda c: rnet.kind[c] in JTL_KINDS or rnet.kind[c] is long_)
    rng.shuffle(runs)
    for run in runs:
        i = 0
        while i < len(run):
            c = run[i]
            if rnet.kind[c] is long_:
                i += 1
                continue
            gain = rnet.node_delay(c, d) - d.t_longjtl
            beside = (i > 0 and rnet.kind[run[i - 1]] is long_) or \
                     (i + 1 < len(run) and rnet.kind[run[i + 1]] is long_)
            if beside:
                if gain <= budget - done:
                    state.set_kind(rnet, c, long_, phase)
                    done += gain
                i += 1
                continue
            if i + 1 < len(run) and rnet.kind[run[i + 1]] is not long_:
                pair_gain = gain + rnet.node_delay(run[i + 1], d) - d.t_longjtl
                if pair_gain <= budget - done:
                    state.set_kind(rnet, c, long_, phase)
                    state.set_kind(rnet, run[i + 1], long_, phase)
                    done += pair_gain
                    i += 2
                    continue
            i += 1
    return done


def shorten_segment(state: DetailedState, rnet: RoutedNet, seg: Segment, res: ResidueTable, *,
                    phase: str = "II", rng: random.Random | None = None,
                    budget: int | None = None) -> int:
    """Cut delay from one segment without breaking any ``lo`` target.

    The bound is the smallest headroom among the segment's sinks (capped
    by ``budget``).  PTL substitution is tried first, then long JTLs.
    Returns the achieved reduction (fs).
    """
    rng = rng or net_rng(state.cfg.rng_seed, phase + "-short", rnet.net.name)
    bound = res.reduction_bound(seg.label)
    if budget is not None:
        bound = min(bound, budget)
    if bound <= 0 or all(res.hold_residue(i) <= state.delays.t_jtl2 for i in seg.label if i in res.lo):
        return 0
    label = seg.label
    total = 0
    while True:
        cur = rnet.segment_for(label)
        got = _try_ptl(state, rnet, cur, bound - total, phase, rng) if cur else 0
        if not got:
            break
        total += got
    cur = rnet.segment_for(label)
    if cur is not None:
        total += _try_longjtl(state, rnet, cur, bound - total, phase, rng)
    return total


# ---------------------------------------------------------------------------
# phases

def _signal_residues(state: DetailedState, rnet: RoutedNet, graph: TimingGraph) -> ResidueTable:
    lo = {}
    for e in graph.edges:
        if e.net == rnet.net.name:
            lo[e.sink_index] = max(0, e.t2 + e.t_hold - e.t1 - e.t_delay)
    return ResidueTable(rnet, lo)


def optimize_signal_net(state: DetailedState, rnet: RoutedNet, graph: TimingGraph | None = None,
                        phase: str = "II") -> dict[int, int]:
    """Algorithm-2 style pass over one net: fix hold, then shorten."""
    graph = graph or state.graph()
    res = _signal_residues(state, rnet, graph)
    if not res.lo:
        return {}
    short = fix_hold(state, rnet, res, phase=phase)
    rng = net_rng(state.cfg.rng_seed, phase + "-short", rnet.net.name)
    for label in [s.label for s in rnet.segments()]:
        seg = rnet.segment_for(label)
        if seg is not None:
            shorten_segment(state, rnet, seg, res, phase=phase, rng=rng)
    return short


def _clock_subtrees(state: DetailedState) -> list[RoutedNet]:
    out = []
    for n in state.design.nets:
        if n.kind == "clock_tree" and n.name in state.routed:
            if any(state.design.instances[i].model.clocked for i, _ in n.sinks):
                out.append(state.routed[n.name])
    return out


def _bridges(state: DetailedState) -> list[RoutedNet]:
    out = []
    for n in state.design.nets:
        if n.kind == "clock_tree" and n.name in state.routed:
            if not any(state.design.instances[i].model.clocked for i, _ in n.sinks):
                out.append(state.routed[n.name])
    return out


def balance_subtree(state: DetailedState, rnet: RoutedNet) -> int:
    """Lengthen the short branches of one clock sub-tree toward its
    slowest sink.  Returns the residual skew (fs)."""
    if not rnet.delays:
        return 0
    target = max(rnet.delays.values())
    lo = {i: target for i in rnet.delays}
    fix_hold(state, rnet, ResidueTable(rnet, lo, dict(lo)), phase="I")
    return target - min(rnet.delays.values())


def optimize_clock_tree(state: DetailedState, lookahead=None) -> dict[str, int]:
    """Phase I: balance every clock sub-tree, deepest level first.

    With ``lookahead`` (a callable that runs the downstream hold repair),
    a sub-tree's balancing is kept only when the repaired design scores
    no worse than it would without it.
    """
    skew = {}
    trees = sorted(_clock_subtrees(state), key=lambda r: -(r.net.level or 0))
    for rnet in trees:
        name = rnet.net.name
        if lookahead is None:
            skew[name] = balance_subtree(state, state.routed[name])
            continue
        base = state.snapshot()
        lookahead()
        without = state.score()
        state.restore(base)
        s = balance_subtree(state, state.routed[name])
        kept = state.snapshot()
        lookahead()
        with_ = state.score()
        if with_ <= without:
            state.restore(kept)
            skew[name] = s
        else:
            state.restore(base)
            r = state.routed[name]
            skew[name] = max(r.delays.values()) - min(r.delays.values()) if r.delays else 0
    return skew


def clock_delay_budget(curr_slacks: Sequence[int], next_slacks: Sequence[int]) -> int:
    """Largest safe clock delay for one instance: half the gap between its
    tightest incoming slack and loosest outgoing slack (0 if negative)."""
    if not curr_slacks:
        return 0
    nxt = max(next_slacks) if next_slacks else 0
    return max(0, (min(curr_slacks) - nxt) // 2)


def _guarded(state: DetailedState, before: tuple[int, int], snap, *, fixing: bool) -> bool:
    """Keep a batch only if it does not hurt; ``fixing`` batches may trade
    frequency for fewer hold violations."""
    after = state.score()
    if after[0] > before[0]:
        state.restore(snap)
        return False
    if after[0] < before[0] and fixing:
        return True
    if after[1] > before[1]:
        state.restore(snap)
        return False
    return True


@dataclass
class RetimeResult:
    accepted: int = 0
    reverted: int = 0
    infeasible: list[str] = field(default_factory=list)


def retime_clock(state: DetailedState) -> RetimeResult:
    """Phase III: move clock arrivals to remove hold violations and to
    pull the slowest edges toward the library bound."""
    out = RetimeResult()
    d = state.delays
    for bridge in _bridges(state):
        k = bridge.net.level or 0
        g = state.graph()
        crossing = [e for e in g.edges if g.level.get(e.driver, 0) < k <= g.level.get(e.receiver, 0)]
        if not crossing or not bridge.delays:
            continue
        m_k = min(hold_slack(e) for e in crossing)
        before = state.score()
        snap = state.snapshot()
        rnet = state.routed[bridge.net.name]
        if m_k < 0:
            need = -m_k
            res = ResidueTable(rnet, {0: rnet.delays[0] - need - d.t_jtl2})
            seg = rnet.segments()[0]
            got = shorten_segment(state, rnet, seg, res, phase="III")
            ok = _guarded(state, before, snap, fixing=True)
            if got < need or not ok:
                out.infeasible.append(bridge.net.name)
        else:
            worst = max(edge_clock_need(e) for e in crossing)
            if m_k == 0 or worst <= g.library_bound:
                continue
            target = rnet.delays[0] + m_k
            res = ResidueTable(rnet, {0: target}, {0: target})
            fix_hold(state, rnet, res, phase="III")
            ok = _guarded(state, before, snap, fixing=False)
        if len(state.log) > snap[2] or not ok:
            out.accepted += ok
            out.reverted += not ok
    # per-instance branch delays
    g = state.graph()
    sink_of: dict[str, tuple[str, int]] = {}
    for rnet in _clock_subtrees(state):
        for i, (inst, _) in enumerate(rnet.net.sinks):
            sink_of[inst] = (rnet.net.name, i)
    wants: dict[str, dict[int, int]] = {}
    for inst in sorted(g.clock_arrival):
        ins = g.edges_into(inst)
        if not ins or inst not in sink_of:
            continue
        if max(edge_clock_need(e) for e in ins) <= g.library_bound:
            continue
        delta = clock_delay_budget([hold_slack(e) for e in ins], [hold_slack(e) for e in g.edges_from(inst)])
        if delta >= d.t_jtl3 - d.t_jtl2:
            net, i = sink_of[inst]
            wants.setdefault(net, {})[i] = delta
    for net in sorted(wants):
        rnet = state.routed[net]
        before = state.score()
        snap = state.snapshot()
        lo = {i: rnet.delays[i] + wants[net].get(i, 0) for i in rnet.delays}
        fix_hold(state, rnet, ResidueTable(rnet, lo, dict(lo)), phase="III")
        ok = _guarded(state, before, snap, fixing=False)
        if len(state.log) > snap[2] or not ok:
            out.accepted += ok
            out.reverted += not ok
    return out


def optimize_io(state: DetailedState) -> int:
    """Phase IV: bring each input arrival close to, but before, its clock."""
    changed = 0
    g = state.graph()
    for rep in io_slack(g):
        rnet = state.routed.get(rep.net)
        if rnet is None or rep.sink_index not in rnet.delays:
            continue
        i = rep.sink_index
        w = rnet.delays[i]
        n_log = len(state.log)
        if rep.gap == 0:
            continue    # boundary: nothing to gain that keeps the input first
        if rep.gap > 0:
            target = w + rep.gap - 1
            fix_hold(state, rnet, ResidueTable(rnet, {i: target}, {i: target}), phase="IV")
        else:
            need = -rep.gap + 1
            res = ResidueTable(rnet, {i: max(0, w - need - state.delays.t_jtl2)})
            snap = state.snapshot()
            for label in [s.label for s in rnet.segments()]:
                seg = rnet.segment_for(label)
                if seg is not None and i in label:
                    shorten_segment(state, rnet, seg, res, phase="IV")
            if w - rnet.delays[i] < need:
                state.restore(snap)
        changed += len(state.log) - n_log
    return changed


@dataclass
class DetailedResult:
    pre_violations: int
    post_violations: int
    pre_t_clk: int
    post_t_clk: int
    shortfall: dict[str, dict[int, int]]
    skew: dict[str, int]
    retime: RetimeResult


def run_detailed(state: DetailedState) -> DetailedResult:
    pre_v, pre_t = state.score()

    def phase2(tag: str) -> dict[str, dict[int, int]]:
        short = {}
        for n in state.design.nets:
            if n.kind != "signal" or n.name not in state.routed:
                continue
            s = optimize_signal_net(state, state.routed[n.name], phase=tag)
            if s:
                short[n.name] = s
        return short

    skew = optimize_clock_tree(state, lookahead=lambda: phase2("II"))
    short = phase2("II")
    rt = retime_clock(state)
    if rt.accepted:
        short = phase2("II")
    if state.cfg.enable_io_opt:
        optimize_io(state)
    post_v, post_t = state.score()
    return DetailedResult(pre_v, post_v, pre_t, post_t, short, skew, rt)
