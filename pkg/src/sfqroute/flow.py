"""End-to-end flow: load, prepare, global route, detailed route, generate, report."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .design import Design, DesignError, build_route_map, load_design
from .detailed import DetailedState, OptimizerConfig, format_log, run_detailed
from .globalroute import route_design
from .grid import RouteMap
from .techlib import (LAYER_PROFILES, Technology, TechnologyError, default_technology, fs_to_ps,
                      load_technology, technology_from_dict, technology_to_dict)
from .timing import analyze, frequency_ghz, io_slack
from .validate import recount_timing, validate_map
from .widgets import compile_widgets, emit_script, manifest_json, widget_manifest

EXIT_OK, EXIT_CONFIG, EXIT_ROUTING, EXIT_TIMING = 0, 1, 2, 3

OUTPUT_FILES = ("routed.wgt", "substitutions.log", "slack_report.json", "report.json",
                "report.txt", "widgets_manifest.json")


class FlowError(RuntimeError):
    def __init__(self, stage: str, message: str, exit_code: int = EXIT_CONFIG):
        self.stage = stage
        self.exit_code = exit_code
        super().__init__(f"[{stage}] {message}")


@dataclass
class FlowConfig:
    placement: str
    netlist: str
    out: str | None = None
    tech: str | None = None
    rng_seed: int = 0
    max_ripup_iters: int = 8
    threads: int = 1
    mode: str | None = None
    enable_io_opt: bool = True


@dataclass
class RoutingReport:
    design: str = ""
    pre_junctions: int = 0
    post_junctions: int = 0
    nets: int = 0
    area_mm2: float = 0.0
    wire_length_um: float = 0.0
    jtl_units: int = 0
    ptl_units: int = 0
    pre_hold_violations: int = 0
    post_hold_violations: int = 0
    worst_slack_ps: float = 0.0
    pre_frequency_ghz: float = 0.0
    post_frequency_ghz: float = 0.0
    pre_t_clk_ps: float = 0.0
    post_t_clk_ps: float = 0.0
    routing_failures: int = 0
    runtime_s: float = 0.0

    def to_dict(self, *, runtime: bool = True) -> dict:
        d = asdict(self)
        if not runtime:
            d.pop("runtime_s")
        return d


@dataclass
class FlowResult:
    report: RoutingReport
    exit_code: int
    design: Design
    rmap: RouteMap
    state: DetailedState
    script: str
    log: str
    files: dict[str, str] = field(default_factory=dict)


def _tech_for(cfg: FlowConfig) -> Technology:
    tech = load_technology(_read(cfg.tech, "technology")) if cfg.tech else default_technology(cfg.mode or "nb04")
    if cfg.tech and cfg.mode:
        if cfg.mode not in LAYER_PROFILES:
            raise TechnologyError(f"unknown layer profile {cfg.mode!r}", "mode")
        doc = technology_to_dict(tech)
        doc["layers"] = [dict(index=i, **spec) for i, spec in enumerate(LAYER_PROFILES[cfg.mode])]
        tech = technology_from_dict(doc)
    return tech


def _read(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise FlowError("load", f"cannot read {what} {path}: {exc.strerror}") from None


def routed_bbox(design: Design, routed) -> tuple[int, int, int, int] | None:
    xs, ys = [], []
    for inst in design.instances.values():
        r = inst.rect
        xs += [r.x0, r.x1]
        ys += [r.y0, r.y1]
    for rn in routed.values():
        for c in rn.parent:
            xs.append(c.x)
            ys.append(c.y)
    if not xs:
        return None
    return min(xs), min(ys), max(xs), max(ys)


def build_report(design: Design, tech: Technology, state: DetailedState, widgets, pre, post,
                 failures: int, runtime: float) -> RoutingReport:
    """``pre``/``post`` are SlackReports before and after detailed routing."""
    gate_jj = sum(i.model.junctions for i in design.instances.values())
    man = widget_manifest(widgets, tech)
    box = routed_bbox(design, state.routed)
    area = 0.0
    if box is not None:
        area = (box[2] - box[0] + 1) * (box[3] - box[1] + 1) * tech.pitch_mm ** 2
    steps = sum(rn.planar_steps() for rn in state.routed.values())
    # nothing clocked, nothing to time
    timed = any(i.model.clocked for i in design.instances.values())
    return RoutingReport(
        design=design.name,
        pre_junctions=gate_jj,
        post_junctions=gate_jj + man["junction_total"],
        nets=len(design.nets),
        area_mm2=round(area, 9),
        wire_length_um=round(steps * tech.pitch_mm * 1000.0, 6),
        jtl_units=man["jtl_units"],
        ptl_units=man["ptl_units"],
        pre_hold_violations=pre.hold_violations,
        post_hold_violations=post.hold_violations,
        worst_slack_ps=fs_to_ps(post.worst_hold),
        pre_frequency_ghz=frequency_ghz(pre.t_clk) if timed else 0.0,
        post_frequency_ghz=frequency_ghz(post.t_clk) if timed else 0.0,
        pre_t_clk_ps=fs_to_ps(pre.t_clk) if timed else 0.0,
        post_t_clk_ps=fs_to_ps(post.t_clk) if timed else 0.0,
        routing_failures=failures,
        runtime_s=round(runtime, 3),
    )


_ROWS = [
    ("Design", "design", "{}"),
    ("Nets", "nets", "{}"),
    ("Junctions pre/post", ("pre_junctions", "post_junctions"), "{}/{}"),
    ("Area (mm^2, routed bbox)", "area_mm2", "{:.4f}"),
    ("Wire length (um)", "wire_length_um", "{:.1f}"),
    ("JTL/PTL units", ("jtl_units", "ptl_units"), "{}/{}"),
    ("Hold violations pre/post", ("pre_hold_violations", "post_hold_violations"), "{}/{}"),
    ("Worst hold slack (ps)", "worst_slack_ps", "{:.1f}"),
    ("t_clk pre/post (ps)", ("pre_t_clk_ps", "post_t_clk_ps"), "{:.1f}/{:.1f}"),
    ("Frequency pre/post (GHz)", ("pre_frequency_ghz", "post_frequency_ghz"), "{:.2f}/{:.2f}"),
    ("Routing failures", "routing_failures", "{}"),
    ("Run time (s)", "runtime_s", "{:.2f}"),
]


def emit_report(report: RoutingReport, fmt: str = "text") -> str:
    if fmt == "machine":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    d = report.to_dict()
    lines = []
    for label, key, spec in _ROWS:
        vals = [d[k] for k in key] if isinstance(key, tuple) else [d[key]]
        lines.append(f"{label:<28}{spec.format(*vals)}")
    return "\n".join(lines) + "\n"


def _slack_doc(graph, report) -> dict:
    doc = report.to_dict()
    doc["io"] = [{"net": r.net, "sink": r.sink_index, "receiver": r.receiver,
                  "gap_ps": fs_to_ps(r.gap), "regime": r.regime} for r in io_slack(graph)]
    return doc


def run_flow(cfg: FlowConfig) -> FlowResult:
    try:
        tech = _tech_for(cfg)
        design = load_design(_read(cfg.placement, "placement"), _read(cfg.netlist, "netlist"), tech)
    except (DesignError, TechnologyError) as exc:
        raise FlowError("load", str(exc)) from None
    try:
        rmap = build_route_map(design, tech)
    except DesignError as exc:
        raise FlowError("prepare", str(exc)) from None

    t0 = time.perf_counter()
    glob = route_design(design, rmap, tech, threads=cfg.threads, max_ripup_iters=cfg.max_ripup_iters)
    _, pre = analyze(design, glob.routed)
    state = DetailedState(design, rmap, glob.routed, tech,
                          OptimizerConfig(rng_seed=cfg.rng_seed, enable_io_opt=cfg.enable_io_opt))
    run_detailed(state)
    runtime = time.perf_counter() - t0

    widgets = compile_widgets(state.routed, rmap, tech)
    script = emit_script(widgets, design=design.name, tech=tech.name)
    issues = validate_map(rmap, state.routed)
    if not issues.ok:
        raise FlowError("generate", "map check failed: " + "; ".join(issues.problems[:5]))
    graph, post = recount_timing(script, design, tech)
    _, mine = analyze(design, state.routed)
    if post.hold != mine.hold or post.t_clk != mine.t_clk:
        raise FlowError("generate", "script recount disagrees with the optimizer")

    report = build_report(design, tech, state, widgets, pre, post, len(glob.failed), runtime)
    code = EXIT_OK
    if glob.failed:
        code = EXIT_ROUTING
    elif post.hold_violations:
        code = EXIT_TIMING
    log = format_log(state.log)
    result = FlowResult(report, code, design, rmap, state, script, log)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        texts = {
            "routed.wgt": script,
            "substitutions.log": log,
            "slack_report.json": json.dumps(_slack_doc(graph, post), indent=2, sort_keys=True) + "\n",
            "report.json": emit_report(report, "machine"),
            "report.txt": emit_report(report, "text"),
            "widgets_manifest.json": manifest_json(widgets, tech),
        }
        for name, text in texts.items():
            p = out / name
            p.write_text(text)
            result.files[name] = str(p)
    return result
