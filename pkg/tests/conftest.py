import json

import pytest

from sfqroute.benches import BENCH_NAMES, write_bench
from sfqroute.design import build_route_map, design_from_docs
from sfqroute.detailed import DetailedState
from sfqroute.flow import FlowConfig, run_flow
from sfqroute.globalroute import route_design
from sfqroute.grid import GridCoord, RouteMap
from sfqroute.techlib import DelayParams, LayerSpec, default_technology, ps_to_fs
from sfqroute.tree import RoutedNet, annotate_kinds


def make_design(instances, nets, grid, tech=None, name="t"):
    tech = tech or default_technology()
    placement = {"design": name, "grid": list(grid),
                 "instances": [dict(name=n, model=m, x=x, y=y) for n, m, x, y in instances]}
    return design_from_docs(placement, {"nets": nets}, tech)


def route(design, tech=None, threads=1):
    tech = tech or design.tech
    rmap = build_route_map(design, tech)
    res = route_design(design, rmap, tech, threads=threads)
    return rmap, res


def routed_state(design, tech=None, **cfg):
    rmap, res = route(design, tech)
    return DetailedState(design, rmap, res.routed, tech or design.tech)


def delays_ps(**over):
    base = dict(t_jtl2=4.0, t_jtl3=5.5, t_jtl4=7.0, t_longjtl=2.5, t_msl=0.4,
                t_drv=9.0, t_rec=8.0, t_split=5.0)
    base.update(over)
    l_drv = int(base.pop("l_drv", 1))
    l_rec = int(base.pop("l_rec", 1))
    return DelayParams(**{k: ps_to_fs(v) for k, v in base.items()}, l_drv=l_drv, l_rec=l_rec)


def single_layer_map(w, h):
    return RouteMap(w, h, (LayerSpec(0, True, True),))


class _Net:
    """Minimal stand-in for a netlist entry in hand-built trees."""

    def __init__(self, name="n", kind="signal", fanout=1, level=None):
        self.name, self.kind, self.level = name, kind, level
        self.sinks = tuple((f"s{i}", "d") for i in range(fanout))


def straight_net(x0, x1, y=3, layer=0, name="n"):
    """Single-sink tree along row ``y`` from x0 (source) to x1 (sink)."""
    coords = [GridCoord(x, y, layer) for x in range(x0, x1 + 1)]
    r = RoutedNet(_Net(name), coords[0], [coords[-1]])
    r.add_path(coords)
    return r


def tree_from_paths(paths, name="n"):
    """Tree from root-to-sink coordinate lists sharing a common source."""
    src = paths[0][0]
    r = RoutedNet(_Net(name, fanout=len(paths)), src, [p[-1] for p in paths])
    for p in paths:
        j = 1
        while j < len(p) and p[j] in r.parent:
            j += 1
        if j < len(p):
            r.add_path(p[j - 1:])
    return r


def commit(rnet, rmap, tech):
    from sfqroute.tree import encode_tree
    encode_tree(rnet, rmap)
    annotate_kinds(rnet, rmap, tech)
    rnet.refresh_delays(tech.delays)
    return rnet


def island_docs(n=4):
    """Placement and netlist docs for ``n`` well separated clusters that
    share one clock tree, so signal routing splits into ``n`` groups."""
    inst, nets, ffs = [dict(name="tap", model="CTAP", x=1, y=1)], [], []
    for k in range(n):
        ox, oy = 4 + 26 * (k % 2), 4 + 18 * (k // 2)
        names = [f"i{k}a", f"i{k}b", f"i{k}c"]
        for j, nm in enumerate(names):
            inst.append(dict(name=nm, model="DFF", x=ox + 5 * j, y=oy + 2 * (j % 2)))
        ffs += names
        nets.append({"name": f"i{k}n0", "source": f"i{k}a.q", "sinks": [f"i{k}b.d", f"i{k}c.d"]})
        nets.append({"name": f"i{k}n1", "source": f"i{k}b.q", "sinks": [f"i{k}a.d"]})
    nets.append({"name": "clk0", "kind": "clock_tree", "level": 0, "source": "tap.q",
                 "sinks": [f"{f}.clk" for f in ffs]})
    placement = {"design": "islands", "grid": [52, 18 * ((n + 1) // 2) + 8], "instances": inst}
    return placement, {"nets": nets}


def write_islands(directory, n=4):
    placement, netlist = island_docs(n)
    paths = {"placement": directory / "islands.placement.json", "netlist": directory / "islands.netlist.json"}
    paths["placement"].write_text(json.dumps(placement))
    paths["netlist"].write_text(json.dumps(netlist))
    return paths


@pytest.fixture(scope="session")
def bench_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("benches")
    return {name: write_bench(name, d) for name in BENCH_NAMES}


@pytest.fixture(scope="session")
def bench_flows(bench_dir, tmp_path_factory):
    out = {}
    for name, paths in bench_dir.items():
        cfg = FlowConfig(placement=str(paths["placement"]), netlist=str(paths["netlist"]),
                         out=str(tmp_path_factory.mktemp(f"flow_{name}")))
        out[name] = run_flow(cfg)
    return out


def manifest_of(paths):
    return json.loads(paths["manifest"].read_text())
