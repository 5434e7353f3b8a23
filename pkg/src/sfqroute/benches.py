"""Desk-scale benchmark generator.

Every bench is a pipelined layout: logic level ``k`` sits in column
``k``, a clock tap sits under each column, bridges chain the taps left
to right and one sub-tree per tap feeds the clock pins of its column.
Because the clock flows with the data, long bridges make short data
wires violate hold, which is what the detailed router has to repair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .techlib import DESK_GATES

X0 = 8          # first logic column
DX = 10         # column pitch
Y0 = 5          # first gate row
DY = 4          # row pitch
TAP_Y = 1


@dataclass
class BenchSpec:
    name: str
    gates: list[tuple[str, str, int, int]]            # name, model, level, row
    nets: list[tuple[str, str, list[str]]]            # name, source, sinks
    inputs: list[tuple[str, str, float]] = field(default_factory=list)   # pad net sink, row, arrival
    outputs: list[str] = field(default_factory=list)  # driving "gate.q"


def _spec_chain(n: int, name: str) -> BenchSpec:
    gates = [(f"ff{i}", "DFF", i, 0) for i in range(n)]
    nets = [(f"d{i}", f"ff{i}.q", [f"ff{i + 1}.d"]) for i in range(n - 1)]
    return BenchSpec(name, gates, nets, inputs=[("ff0.d", 0, 0.0)], outputs=[f"ff{n - 1}.q"])


def _spec_c17() -> BenchSpec:
    gates = [
        ("g10", "AND", 0, 0), ("g11", "OR", 0, 2),
        ("g16", "AND", 1, 4), ("g19", "OR", 1, 8),
        ("g22", "OR", 2, 8), ("g23", "AND", 2, 6),
    ]
    nets = [
        ("n10", "g10.q", ["g22.a"]),
        ("n11", "g11.q", ["g16.b", "g19.a"]),
        ("n16", "g16.q", ["g22.b", "g23.a"]),
        ("n19", "g19.q", ["g23.b"]),
    ]
    inputs = [("g10.a", 0, 0.0), ("g10.b", 0, 0.0), ("g11.a", 2, 0.0), ("g11.b", 2, 0.0),
              ("g16.a", 4, 0.0), ("g19.b", 8, 0.0)]
    return BenchSpec("c17", gates, nets, inputs, outputs=["g22.q", "g23.q"])


def _spec_adder() -> BenchSpec:
    gates = []
    for i in range(4):
        gates.append((f"p{i}", "AND", 0, 2 * i))
        gates.append((f"s{i}", "OR", 1, 2 * i))
        gates.append((f"r{i}", "DFF", 2, 2 * i))
    nets = []
    for i in range(4):
        sinks = [f"s{i}.a"] + ([f"s{i + 1}.b"] if i < 3 else [])
        nets.append((f"p{i}", f"p{i}.q", sinks))
        nets.append((f"s{i}", f"s{i}.q", [f"r{i}.d"]))
    inputs = [(f"p{i}.{p}", 2 * i, 0.0) for i in range(4) for p in ("a", "b")]
    inputs.append(("s0.b", 0, 0.0))
    return BenchSpec("adder", gates, nets, inputs, outputs=[f"r{i}.q" for i in range(4)])


def _spec_srarray(rows: int = 3, stages: int = 4) -> BenchSpec:
    gates = [(f"sr{r}_{k}", "DFF", k, 2 * r) for r in range(rows) for k in range(stages)]
    nets = [(f"q{r}_{k}", f"sr{r}_{k}.q", [f"sr{r}_{k + 1}.d"])
            for r in range(rows) for k in range(stages - 1)]
    inputs = [(f"sr{r}_0.d", 2 * r, 0.0) for r in range(rows)]
    return BenchSpec("srarray", gates, nets, inputs, outputs=[f"sr{r}_{stages - 1}.q" for r in range(rows)])


SPECS = {
    "chain2": lambda: _spec_chain(2, "chain2"),
    "chain": lambda: _spec_chain(6, "chain"),
    "c17": _spec_c17,
    "adder": _spec_adder,
    "srarray": _spec_srarray,
}
BENCH_NAMES = tuple(SPECS)


def generate(name: str) -> tuple[dict, dict, dict]:
    """Return (placement, netlist, manifest) documents for a bench."""
    spec = SPECS[name]()
    levels = max(g[2] for g in spec.gates) + 1
    rows = max(g[3] for g in spec.gates) + 1
    width = X0 + levels * DX + 2
    height = Y0 + rows * DY // 2 + DY + 2
    instances = []
    for gname, model, level, row in spec.gates:
        instances.append({"name": gname, "model": model, "x": X0 + level * DX,
                          "y": Y0 + row * DY // 2, "orient": "R0"})
    for k in range(levels):
        instances.append({"name": f"tap{k}", "model": "CTAP", "x": X0 + k * DX - 3,
                          "y": TAP_Y, "orient": "R0"})
    nets = []
    for k in range(levels):
        clk_sinks = [f"{g[0]}.clk" for g in spec.gates if g[2] == k]
        if k > 0:
            nets.append({"name": f"clkb{k}", "kind": "clock_tree", "level": k,
                         "source": f"tap{k - 1}.nx", "sinks": [f"tap{k}.in"]})
        nets.append({"name": f"clk{k}", "kind": "clock_tree", "level": k,
                     "source": f"tap{k}.q", "sinks": clk_sinks})
    for nname, src, sinks in spec.nets:
        nets.append({"name": nname, "kind": "signal", "source": src, "sinks": list(sinks)})
    pads_at: dict[int, int] = {}
    for i, (sink, row, arrival) in enumerate(spec.inputs):
        pad = f"in{i}"
        y = Y0 + row * DY // 2 + (1 if sink.endswith(".b") else 0)
        slot = pads_at.get(y, 0)
        pads_at[y] = slot + 1
        instances.append({"name": pad, "model": "IN", "x": X0 - 5 - 2 * slot,
                          "y": y, "orient": "R0"})
        nets.append({"name": f"i{i}", "kind": "io", "source": f"{pad}.q", "sinks": [sink],
                     "arrival": arrival})
    for j, src in enumerate(spec.outputs):
        gname = src.split(".")[0]
        g = next(inst for inst in instances if inst["name"] == gname)
        pad = f"out{j}"
        instances.append({"name": pad, "model": "OUT", "x": X0 + levels * DX - 1,
                          "y": g["y"], "orient": "R0"})
        nets.append({"name": f"o{j}", "kind": "io", "source": src, "sinks": [f"{pad}.a"]})
    placement = {"format": "sfqroute-placement/1", "design": name, "grid": [width, height],
                 "instances": instances}
    netlist = {"format": "sfqroute-netlist/1", "design": name, "nets": nets}
    kinds: dict[str, int] = {}
    for n in nets:
        kinds[n["kind"]] = kinds.get(n["kind"], 0) + 1
    area = 0
    for inst in instances:
        w, h = DESK_GATES[inst["model"]]["size"]
        area += w * h
    manifest = {
        "design": name,
        "gates": sum(1 for i in instances if DESK_GATES[i["model"]]["clocked"]),
        "instances": len(instances),
        "nets": len(nets),
        "nets_by_kind": dict(sorted(kinds.items())),
        "levels": levels,
        "blocked_nodes": area,
        "data_edges": sum(len(s) for _, _, s in spec.nets),
    }
    return placement, netlist, manifest


def write_bench(name: str, directory: str | Path) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    placement, netlist, manifest = generate(name)
    paths = {}
    for suffix, doc in (("placement", placement), ("netlist", netlist), ("manifest", manifest)):
        p = directory / f"{name}.{suffix}.json"
        p.write_text(json.dumps(doc, indent=2) + "\n")
        paths[suffix] = p
    return paths


def bench_texts(name: str) -> tuple[str, str]:
    placement, netlist, _ = generate(name)
    return json.dumps(placement), json.dumps(netlist)
