"""Widget compilation and the line-oriented layout script.

Script grammar::

    # <key> <value>                                   header
    W <kind> <layer> <x> <y> <orient> <span> <dirs>   one widget

``dirs`` is ``in>out[,out...]`` with ``-`` for a pin end; a cross lists
both of its through paths separated by ``|``.  Run widgets (LongJTL,
MSL, Via columns) start at ``(x, y, layer)`` and extend ``span`` nodes
along ``orient``; ``dirs`` then gives the entry of the first node and
the exit of the last.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .grid import GridCoord, RouteMap, is_planar, step
from .techlib import Technology, WidgetKind, widget_delay, widget_junctions
from .tree import RoutedNet

SCRIPT_FORMAT = "sfqroute-widgets/1"
RUN_KINDS = frozenset({WidgetKind.LONGJTL, WidgetKind.MSL, WidgetKind.VIA})


class WidgetError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class WidgetInstance:
    layer: int
    y: int
    x: int
    kind: WidgetKind
    dirs: str
    orient: str
    span: int = 1

    @property
    def origin(self) -> GridCoord:
        return GridCoord(self.x, self.y, self.layer)

    def coords(self) -> list[GridCoord]:
        out, c = [], self.origin
        for _ in range(self.span):
            out.append(c)
            c = step(c, self.orient)
        return out

    @property
    def fanout(self) -> int:
        if self.kind is WidgetKind.CROSS:
            return 1
        outs = self.dirs.split(">", 1)[1]
        return 0 if outs == "-" else len(outs.split(","))

    def delay(self, delays) -> int:
        return widget_delay(self.kind, self.span, delays, fanout=max(self.fanout, 2))

    @property
    def junctions(self) -> int:
        n = widget_junctions(self.kind, self.fanout)
        return n * self.span if self.kind in (WidgetKind.LONGJTL, WidgetKind.JTL2, WidgetKind.JTL3,
                                               WidgetKind.JTL4) else n

    def through(self, entry: str | None, index: int) -> list[str]:
        """Exit directions of the ``index``-th covered node when entered via ``entry``."""
        if self.kind is WidgetKind.CROSS:
            for part in self.dirs.split("|"):
                a, b = part.split(">")
                if a == entry:
                    return [b]
            raise WidgetError(f"cross at {self.origin} has no path entering {entry}")
        if index < self.span - 1:
            return [self.orient]
        outs = self.dirs.split(">", 1)[1]
        return [] if outs == "-" else outs.split(",")

    def line(self) -> str:
        return f"W {self.kind.value} {self.layer} {self.x} {self.y} {self.orient} {self.span} {self.dirs}"


def _node_dirs(rnet: RoutedNet, c: GridCoord) -> tuple[str, list[str]]:
    return rnet.in_dir(c) or "-", rnet.out_dirs(c)


def _fmt_dirs(d_in: str, outs: Sequence[str]) -> str:
    return f"{d_in}>{','.join(outs) if outs else '-'}"


def _net_widgets(rnet: RoutedNet) -> tuple[list[WidgetInstance], list[tuple[GridCoord, str]]]:
    """Widgets of one net, plus its cross passages for later merging."""
    out: list[WidgetInstance] = []
    crosses = []
    done: set[GridCoord] = set()
    for c in rnet.nodes():
        if c in done:
            continue
        kind = rnet.kind[c]
        d_in, outs = _node_dirs(rnet, c)
        if kind is WidgetKind.CROSS:
            if len(outs) != 1 or d_in != outs[0] or not is_planar(d_in):
                raise WidgetError(f"cross at {c} in {rnet.net.name} is not a straight pass")
            crosses.append((c, f"{d_in}>{outs[0]}"))
            done.add(c)
            continue
        run = [c]
        if kind in RUN_KINDS and len(outs) == 1:
            orient = outs[0]
            n = c
            while rnet.out_dirs(n) == [orient]:
                nxt = rnet.children(n)[0]
                if rnet.kind[nxt] is not kind or nxt in rnet.sinks:
                    break
                run.append(nxt)
                n = nxt
            outs = rnet.out_dirs(run[-1])
        else:
            orient = outs[0] if len(outs) == 1 else (d_in if d_in != "-" else (outs[0] if outs else "E"))
        if kind is WidgetKind.LONGJTL and any(rnet.out_dirs(n) != [orient] for n in run[:-1]):
            raise WidgetError(f"long JTL at {c} is not straight")
        done.update(run)
        out.append(WidgetInstance(c.layer, c.y, c.x, kind, _fmt_dirs(d_in, outs), orient, len(run)))
    return out, crosses


def compile_widgets(routed: Mapping[str, RoutedNet], rmap: RouteMap | None = None,
                    tech: Technology | None = None) -> list[WidgetInstance]:
    """Turn annotated route trees into a sorted widget list.

    Run widgets only coalesce nodes that the tree visits consecutively in
    one direction, so every sink path covers a run entirely and delays
    add up exactly.
    """
    widgets: list[WidgetInstance] = []
    cross_parts: dict[GridCoord, list[str]] = {}
    for name in sorted(routed):
        ws, crosses = _net_widgets(routed[name])
        widgets.extend(ws)
        for c, part in crosses:
            cross_parts.setdefault(c, []).append(part)
    for c, parts in cross_parts.items():
        if len(parts) != 2:
            raise WidgetError(f"cross at {c} carries {len(parts)} paths")
        axes = {p[0] in "EW" for p in parts}
        if len(axes) != 2:
            raise WidgetError(f"cross at {c} has parallel paths")
        parts.sort()
        widgets.append(WidgetInstance(c.layer, c.y, c.x, WidgetKind.CROSS, "|".join(parts), parts[0][0], 1))
    widgets.sort()
    if rmap is not None:
        _check_coverage(widgets, rmap)
    return widgets


def _check_coverage(widgets: Sequence[WidgetInstance], rmap: RouteMap) -> None:
    seen: set[GridCoord] = set()
    for w in widgets:
        for c in w.coords():
            s = rmap.get(c)
            if s == 0 or s == 3:
                raise WidgetError(f"{w.kind.value} widget covers {c} with state {s}")
            if c in seen:
                raise WidgetError(f"node {c} covered twice")
            seen.add(c)


# ---------------------------------------------------------------------------
# script text

def _body(widgets: Iterable[WidgetInstance]) -> str:
    return "".join(w.line() + "\n" for w in sorted(widgets))


def _text_formatter(widgets: Sequence[WidgetInstance], design: str, tech: str) -> str:
    body = _body(widgets)
    digest = hashlib.sha256(body.encode()).hexdigest()
    head = (f"# format {SCRIPT_FORMAT}\n# design {design}\n# tech {tech}\n"
            f"# widgets {len(widgets)}\n# sha256 {digest}\n")
    return head + body


FORMATTERS: dict[str, Callable[[Sequence[WidgetInstance], str, str], str]] = {
    "text": _text_formatter,
}


def emit_script(widgets: Sequence[WidgetInstance], format: str = "text", *,
                design: str = "", tech: str = "") -> str:
    try:
        fmt = FORMATTERS[format]
    except KeyError:
        raise WidgetError(f"unknown script format {format!r}") from None
    return fmt(list(widgets), design or "-", tech or "-")


@dataclass
class ParsedScript:
    header: dict[str, str]
    widgets: list[WidgetInstance]

    def emit(self) -> str:
        return emit_script(self.widgets, design=self.header.get("design", "-"),
                           tech=self.header.get("tech", "-"))


def parse_script(text: str, *, verify: bool = True) -> ParsedScript:
    header: dict[str, str] = {}
    widgets: list[WidgetInstance] = []
    body_lines = []
    for no, line in enumerate(text.split("\n"), 1):
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(" ")
            header[key] = val
            continue
        parts = line.split(" ")
        if len(parts) != 8 or parts[0] != "W":
            raise WidgetError(f"line {no}: malformed widget line")
        try:
            kind = WidgetKind(parts[1])
            layer, x, y, span = int(parts[2]), int(parts[3]), int(parts[4]), int(parts[6])
        except ValueError as exc:
            raise WidgetError(f"line {no}: {exc}") from None
        widgets.append(WidgetInstance(layer, y, x, kind, parts[7], parts[5], span))
        body_lines.append(line + "\n")
    if verify and "sha256" in header:
        digest = hashlib.sha256("".join(body_lines).encode()).hexdigest()
        if digest != header["sha256"]:
            raise WidgetError("checksum mismatch")
    return ParsedScript(header, widgets)


# ---------------------------------------------------------------------------
# manifest and tracing

def widget_manifest(widgets: Sequence[WidgetInstance], tech: Technology) -> dict:
    counts = Counter(w.kind.value for w in widgets)
    junctions = Counter()
    units = Counter()
    for w in widgets:
        junctions[w.kind.value] += w.junctions
        units[w.kind.value] += w.span
    jtl_units = sum(units[k] for k in ("JTL2", "JTL3", "JTL4", "LongJTL", "Splitter", "Cross"))
    ptl_units = sum(units[k] for k in ("Driver", "Receiver", "MSL"))
    return {
        "format": "sfqroute-widget-manifest/1",
        "tech": tech.name,
        "widgets": len(widgets),
        "counts": dict(sorted(counts.items())),
        "units": dict(sorted(units.items())),
        "junctions": dict(sorted(junctions.items())),
        "junction_total": sum(junctions.values()),
        "jtl_units": jtl_units,
        "ptl_units": ptl_units,
    }


def manifest_json(widgets: Sequence[WidgetInstance], tech: Technology) -> str:
    return json.dumps(widget_manifest(widgets, tech), indent=2, sort_keys=True) + "\n"


def trace_net(widgets_at: Mapping[GridCoord, tuple[WidgetInstance, int]], source: GridCoord,
              sinks: Sequence[GridCoord], delays) -> dict[int, int]:
    """Follow widget directions from ``source``; per-sink accumulated delay.

    A sink that is never reached is missing from the result.
    """
    where: dict[GridCoord, list[int]] = {}
    for i, s in enumerate(sinks):
        where.setdefault(s, []).append(i)
    out: dict[int, int] = {}
    stack = [(source, None, 0)]
    seen = set()
    while stack:
        c, entry, acc = stack.pop()
        if (c, entry) in seen:
            raise WidgetError(f"trace loops at {c}")
        seen.add((c, entry))
        hit = widgets_at.get(c)
        if hit is None:
            raise WidgetError(f"trace left the widgets at {c}")
        w, idx = hit
        if idx == 0:
            acc += w.delay(delays)
        for i in where.get(c, ()):
            out[i] = acc
        for d in w.through(entry, idx):
            stack.append((step(c, d), d, acc))
    return out


def index_widgets(widgets: Iterable[WidgetInstance]) -> dict[GridCoord, tuple[WidgetInstance, int]]:
    at = {}
    for w in widgets:
        for i, c in enumerate(w.coords()):
            at[c] = (w, i)
    return at
