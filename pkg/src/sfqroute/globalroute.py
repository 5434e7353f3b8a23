"""Global routing: per-net trees, group rip-up/reroute, design-level driver."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence


from .astar import Path, SearchBound, astar_route
from .design import CoordPair, Design, RouteGroup, cluster_nets, sort_route_queue
from .grid import EMPTY, SATURATED, SINGLE, GridCoord, RouteMap, direction, is_planar
from .techlib import Technology
from .tree import RoutedNet, annotate_kinds, encode_tree

log = logging.getLogger(__name__)

MAX_SPLIT_BRANCHES = 3


@dataclass
class GroupResult:
    routed: dict[str, RoutedNet]
    failed: list[tuple[str, int]]
    iterations: int
    attempts: int


@dataclass
class GlobalResult:
    routed: dict[str, RoutedNet]
    failed: list[tuple[str, int]]
    groups: list[GroupResult] = field(default_factory=list)


def _search(pair: CoordPair, rmap: RouteMap, tech: Technology, allow_ptl: bool) -> Path | None:
    bound = SearchBound.for_pair(pair.source, pair.dest, rmap)
    path = astar_route(pair.source, pair.dest, rmap, bound)
    if path is None and allow_ptl and rmap.n_layers > 1 and tech.has_ptl:
        # PTL channel: only after the JTL-only attempt fails
        path = astar_route(pair.source, pair.dest, rmap, bound, ptl_channel_open=True)
    return path


def _splittable(rnet: RoutedNet, rmap: RouteMap, c: GridCoord) -> bool:
    """Can ``c`` host a splitter for a new branch?"""
    if c.layer != 0 or c in rnet.sinks or rmap.get(c) != EMPTY:
        return False
    d_in = rnet.in_dir(c)
    if d_in is not None and not is_planar(d_in):
        return False
    outs = rnet.out_dirs(c)
    if any(not is_planar(d) for d in outs):
        return False
    return len(outs) < MAX_SPLIT_BRANCHES


def _merge_prefix(rnet: RoutedNet, rmap: RouteMap, coords: Sequence[GridCoord]) -> bool:
    """Graft ``coords`` onto the tree along its longest common prefix."""
    if coords[0] != rnet.source:
        return False
    j = 1
    while j < len(coords) and coords[j] in rnet.parent and rnet.parent[coords[j]] == coords[j - 1]:
        j += 1
    if j == len(coords):
        return False
    div = coords[j - 1]
    rest = coords[j:]
    if any(c in rnet.parent for c in rest):
        return False
    if rnet.children(div) and not _splittable(rnet, rmap, div):
        return False
    if not is_planar(direction(div, rest[0])) and rnet.children(div):
        return False
    rnet.add_path([div, *rest])
    return True


def _attach(rnet: RoutedNet, rmap: RouteMap, pair: CoordPair) -> bool:
    """Multi-source search from every node that can take a splitter."""
    starts = [c for c in rnet.nodes()
              if (c == rnet.source and not rnet.children(c)) or _splittable(rnet, rmap, c)]
    if not starts:
        return False
    bound = SearchBound.for_pair(pair.source, pair.dest, rmap)
    starts = [c for c in starts if bound.contains(c)]
    if not starts:
        return False
    path = astar_route(None, pair.dest, rmap, bound, sources=starts,
                       blocked=frozenset(rnet.parent))
    if path is None:
        return False
    rnet.add_path(path.coords)
    return True


def route_net(pairs: Sequence[CoordPair], rmap: RouteMap, tech: Technology) -> RoutedNet:
    """Route every sink of one net and commit the tree to the map.

    Sinks are searched independently, then merged by longest common
    prefix; divergence nodes become splitters.  The map is only written
    once the whole tree is refined.  Unroutable sinks land in ``failed``.
    """
    net = pairs[0].net
    sinks: list[GridCoord] = [GridCoord(-1, -1, 0)] * net.fanout
    for p in pairs:
        sinks[p.sink_index] = p.dest
    rnet = RoutedNet(net, pairs[0].source, sinks)
    multi = net.fanout > 1
    raw = {p.sink_index: _search(p, rmap, tech, allow_ptl=not multi) for p in pairs}
    failed = []
    for p in pairs:
        path = raw[p.sink_index]
        if path is not None and len(path.coords) == 1:
            continue
        if path is not None and _merge_prefix(rnet, rmap, path.coords):
            continue
        if multi and _attach(rnet, rmap, p):
            continue
        failed.append(p.sink_index)
    rnet.failed = sorted(failed)
    rnet.touch()
    encode_tree(rnet, rmap)
    return rnet


def _route_queue(queue: Sequence[CoordPair], rmap: RouteMap, tech: Technology):
    by_net: dict[str, list[CoordPair]] = {}
    for p in queue:
        by_net.setdefault(p.net.name, []).append(p)
    routed = {}
    failed = []
    for name, pairs in by_net.items():
        rnet = route_net(pairs, rmap, tech)
        routed[name] = rnet
        failed.extend((name, i) for i in rnet.failed)
    return routed, failed


def route_group(group: RouteGroup | Sequence[CoordPair], rmap: RouteMap, tech: Technology,
                max_ripup_iters: int = 8) -> GroupResult:
    """Route a group with restart-style rip-up and reroute.

    On failure the group's map data is restored from the snapshot, the
    failed pairs move to the queue front and everything is rerouted.  Stops
    on success, on a repeated queue order or after ``max_ripup_iters``.
    The attempt with the fewest failures (then the most used nodes, then
    the earliest) is kept.
    """
    queue = sort_route_queue(group)
    snapshot = rmap.copy()
    history = {tuple(p.key for p in queue)}
    attempts = []
    it = 0
    while True:
        it += 1
        rmap.restore(snapshot)
        routed, failed = _route_queue(queue, rmap, tech)
        used = int(((rmap.state == SINGLE) | (rmap.state == SATURATED)).sum())
        attempts.append((len(failed), -used, it, rmap.copy(), routed, failed))
        if not failed or it >= max_ripup_iters:
            break
        fk = set(failed)
        queue = [p for p in queue if p.key in fk] + [p for p in queue if p.key not in fk]
        key = tuple(p.key for p in queue)
        if key in history:
            break
        history.add(key)
    n_failed, _, best_it, best_map, routed, failed = min(attempts, key=lambda a: a[:3])
    rmap.restore(best_map)
    return GroupResult(routed, failed, it, len(attempts))


def _group_worker(args):
    group, rmap, tech, max_iters = args
    res = route_group(group, rmap, tech, max_iters)
    return res, rmap


def _merge_map(base: RouteMap, before: RouteMap, after: RouteMap) -> None:
    diff = (before.state != after.state) | (before.axis != after.axis)
    base.state[diff] = after.state[diff]
    base.axis[diff] = after.axis[diff]
    for c, owners in after.owners.items():
        if before.owners.get(c) != owners:
            base.owners[c] = list(owners)


def route_design(design: Design, rmap: RouteMap, tech: Technology, *, threads: int = 1,
                 max_ripup_iters: int = 8, margin: int = 5) -> GlobalResult:
    """Cluster, sort and route every group; large fan-out group goes first.

    Signal groups have disjoint search regions, so they may be routed in
    worker processes; the merged result does not depend on ``threads``.
    """
    groups = cluster_nets(design.pairs(), margin)
    results: list[GroupResult] = []
    rest = groups
    if groups and groups[0].large:
        results.append(route_group(groups[0], rmap, tech, max_ripup_iters))
        rest = groups[1:]
    if threads > 1 and len(rest) > 1:
        base = rmap.copy()
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(_group_worker, [(g, base.copy(), tech, max_ripup_iters) for g in rest]))
        for res, after in outs:
            _merge_map(rmap, base, after)
            results.append(res)
    else:
        for g in rest:
            results.append(route_group(g, rmap, tech, max_ripup_iters))
    routed: dict[str, RoutedNet] = {}
    failed = []
    for res in results:
        routed.update(res.routed)
        failed.extend(res.failed)
    ordered = {n.name: routed[n.name] for n in design.nets if n.name in routed}
    for rnet in ordered.values():
        annotate_kinds(rnet, rmap, tech)
        rnet.refresh_delays(tech.delays)
    return GlobalResult(ordered, failed, results)
