"""The widget script is the product, so it has to stand on its own.

Parse the emitted script, re-emit it, and trace every net back through the
placed widgets. The traced delays must equal the router's own numbers.
"""

import tempfile

from sfqroute.benches import write_bench
from sfqroute.flow import FlowConfig, run_flow
from sfqroute.widgets import WidgetError, index_widgets, parse_script, trace_net

with tempfile.TemporaryDirectory() as tmp:
    paths = write_bench("adder", tmp)
    res = run_flow(FlowConfig(placement=str(paths["placement"]), netlist=str(paths["netlist"])))

text = res.script
print("\n".join(text.splitlines()[:8]))
print("...")

parsed = parse_script(text)
assert parsed.emit() == text
at = index_widgets(parsed.widgets)
for name, rnet in sorted(res.state.routed.items()):
    traced = trace_net(at, rnet.source, rnet.sinks, res.state.delays)
    assert traced == rnet.delays, name
print(f"{len(parsed.widgets)} widgets, {len(res.state.routed)} nets traced, byte-identical re-emit")

# Any edit to the body is caught by the checksum line.
try:
    parse_script(text.replace("W JTL2", "W JTL3", 1))
except WidgetError as exc:
    print(f"tampered copy rejected: {exc}")
