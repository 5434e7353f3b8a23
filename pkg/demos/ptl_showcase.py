"""Long wires get cheaper when they turn into passive transmission lines.

Two flip-flops sit 28 tracks apart. Routed purely with JTL cells the data
wire alone costs over 100 ps, which sets the clock period. The detailed
router swaps the long straight run for a driver, microstrip and receiver,
then repairs whatever hold slack that costs.
"""

from sfqroute.design import build_route_map, design_from_docs
from sfqroute.detailed import DetailedState, run_detailed
from sfqroute.globalroute import route_design
from sfqroute.techlib import WidgetKind, default_technology, ptl_breakeven_length
from sfqroute.timing import analyze

for mode in ("nb03", "nb04"):
    tech = default_technology(mode)
    placement = {"design": "ptl", "grid": [40, 10], "instances": [
        {"name": "tap", "model": "CTAP", "x": 28, "y": 1},
        {"name": "ff0", "model": "DFF", "x": 4, "y": 5},
        {"name": "ff1", "model": "DFF", "x": 32, "y": 5}]}
    netlist = {"nets": [
        {"name": "d", "source": "ff0.q", "sinks": ["ff1.d"]},
        {"name": "clk0", "kind": "clock_tree", "level": 0, "source": "tap.q",
         "sinks": ["ff0.clk", "ff1.clk"]}]}
    design = design_from_docs(placement, netlist, tech)
    rmap = build_route_map(design, tech)
    routed = route_design(design, rmap, tech).routed
    _, pre = analyze(design, routed)

    state = DetailedState(design, rmap, routed, tech)
    run_detailed(state)
    _, post = analyze(design, state.routed)

    kinds = [k.value for k in state.routed["d"].kind.values() if k is not None]
    ptl = sum(k in (WidgetKind.MSL.value, WidgetKind.VIA.value) for k in kinds)
    print(f"{mode}: t_clk {pre.t_clk / 1000:.1f} -> {post.t_clk / 1000:.1f} ps, "
          f"hold violations {pre.hold_violations} -> {post.hold_violations}, "
          f"{ptl} of {len(kinds)} data-wire cells are PTL")

print(f"break-even length with desk delays: {ptl_breakeven_length(default_technology().delays)} cells")
