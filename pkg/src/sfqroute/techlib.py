"""Technology description: layers, wire delays, gate timing.

All times are held as integer femtoseconds so that incremental timing
updates can be compared bit-exactly against full recomputation.  The
technology file stores picoseconds; conversion happens at the boundary.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

FS_PER_PS = 1000

SIDES = ("W", "E", "S", "N")


def ps_to_fs(value: float) -> int:
    return int(round(float(value) * FS_PER_PS))


def fs_to_ps(value: int) -> float:
    return value / FS_PER_PS


class TechnologyError(ValueError):
    """Raised for malformed or invalid technology content.

    ``field`` names the offending entry (dotted path) when known.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class WidgetKind(str, enum.Enum):
    JTL2 = "JTL2"
    JTL3 = "JTL3"
    JTL4 = "JTL4"
    LONGJTL = "LongJTL"
    SPLITTER = "Splitter"
    CROSS = "Cross"
    DRIVER = "Driver"
    RECEIVER = "Receiver"
    MSL = "MSL"
    VIA = "Via"

    def __str__(self) -> str:
        return self.value


JUNCTIONS = {
    WidgetKind.JTL2: 2,
    WidgetKind.LONGJTL: 2,
    WidgetKind.JTL3: 3,
    WidgetKind.JTL4: 4,
    WidgetKind.SPLITTER: 3,
    WidgetKind.CROSS: 4,
    WidgetKind.DRIVER: 2,
    WidgetKind.RECEIVER: 2,
    WidgetKind.MSL: 0,
    WidgetKind.VIA: 0,
}

# junction ladder used by hold fixing: 2 -> 3 -> 4
UPGRADE = {WidgetKind.JTL2: WidgetKind.JTL3, WidgetKind.JTL3: WidgetKind.JTL4}
JTL_KINDS = frozenset({WidgetKind.JTL2, WidgetKind.JTL3, WidgetKind.JTL4})


@dataclass(frozen=True)
class LayerSpec:
    index: int
    jtl_enabled: bool
    ptl_enabled: bool

    @property
    def ptl_only(self) -> bool:
        return self.ptl_enabled and not self.jtl_enabled

    @property
    def ptl_direction(self) -> str | None:
        """'vertical' on odd layers, 'horizontal' on even ones (PTL-only layers)."""
        if not self.ptl_only:
            return None
        return "vertical" if self.index % 2 else "horizontal"


@dataclass(frozen=True)
class DelayParams:
    """Wire delay parameters in femtoseconds (per unit where applicable)."""

    t_jtl2: int
    t_jtl3: int
    t_jtl4: int
    t_longjtl: int
    t_msl: int
    t_drv: int
    t_rec: int
    t_split: int
    l_drv: int = 1
    l_rec: int = 1

    def validate(self) -> None:
        for name in ("t_jtl2", "t_jtl3", "t_jtl4", "t_longjtl", "t_msl",
                     "t_drv", "t_rec", "t_split"):
            if getattr(self, name) <= 0:
                raise TechnologyError("must be strictly positive", f"delays.{name}")
        for name in ("l_drv", "l_rec"):
            if getattr(self, name) < 0:
                raise TechnologyError("must be non-negative", f"delays.{name}")
        if self.t_msl >= self.t_jtl2:
            raise TechnologyError("t_msl must be below t_jtl2", "delays.t_msl")
        if not self.t_jtl2 < self.t_jtl3 < self.t_jtl4:
            raise TechnologyError("need t_jtl2 < t_jtl3 < t_jtl4", "delays.t_jtl3")
        if self.t_longjtl >= self.t_jtl2:
            raise TechnologyError("t_longjtl must be below t_jtl2", "delays.t_longjtl")

    def per_unit(self, kind: WidgetKind) -> int:
        return {
            WidgetKind.JTL2: self.t_jtl2,
            WidgetKind.JTL3: self.t_jtl3,
            WidgetKind.JTL4: self.t_jtl4,
            WidgetKind.LONGJTL: self.t_longjtl,
            WidgetKind.MSL: self.t_msl,
        }[kind]


@dataclass(frozen=True)
class Port:
    name: str
    offset: int
    side: str


@dataclass(frozen=True)
class GateModel:
    name: str
    width: int
    height: int
    ports: tuple[Port, ...]
    t_delay: int
    t_hold: int
    t_setup: int
    clocked: bool
    junctions: int = 0

    def port(self, name: str) -> Port:
        for p in self.ports:
            if p.name == name:
                return p
        raise KeyError(f"gate model {self.name} has no port {name!r}")


@dataclass(frozen=True)
class Technology:
    name: str
    pitch_mm: float
    layers: tuple[LayerSpec, ...]
    delays: DelayParams
    gates: Mapping[str, GateModel] = field(hash=False)

    @property
    def jtl_layers(self) -> list[int]:
        return [l.index for l in self.layers if l.jtl_enabled]

    @property
    def ptl_only_layers(self) -> list[int]:
        return [l.index for l in self.layers if l.ptl_only]

    @property
    def has_ptl(self) -> bool:
        return any(l.ptl_enabled for l in self.layers)

    @property
    def library_bound(self) -> int:
        """Max of hold + setup over clocked gate models (fs)."""
        vals = [g.t_hold + g.t_setup for g in self.gates.values() if g.clocked]
        return max(vals) if vals else 0

    def validate(self) -> None:
        if not self.layers:
            raise TechnologyError("at least one layer required", "layers")
        for i, layer in enumerate(self.layers):
            if layer.index != i:
                raise TechnologyError("indices must be contiguous from 0", f"layers[{i}].index")
        if not self.layers[0].jtl_enabled:
            raise TechnologyError("layer 0 must be JTL enabled", "layers[0].jtl")
        if self.pitch_mm <= 0:
            raise TechnologyError("must be positive", "pitch_mm")
        self.delays.validate()
        for name, g in self.gates.items():
            if g.width <= 0 or g.height <= 0:
                raise TechnologyError("size must be positive", f"gates.{name}.size")
            if g.t_hold < 0 or g.t_setup < 0 or g.t_delay < 0:
                raise TechnologyError("timing values must be non-negative", f"gates.{name}")
            for p in g.ports:
                if p.side not in SIDES:
                    raise TechnologyError(f"bad side {p.side!r}", f"gates.{name}.ports.{p.name}")
                edge = g.height if p.side in ("W", "E") else g.width
                if not 0 <= p.offset < edge:
                    raise TechnologyError("offset outside block edge", f"gates.{name}.ports.{p.name}")


def ptl_breakeven_length(delays: DelayParams) -> int:
    """Smallest span for which a PTL is no slower than a JTL2 line."""
    num = delays.t_drv + delays.t_rec - (delays.l_drv + delays.l_rec) * delays.t_msl
    den = delays.t_jtl2 - delays.t_msl
    return max(1, -(-num // den))


def widget_delay(kind: WidgetKind | str, span: int, delays: DelayParams, fanout: int = 2) -> int:
    """Delay in fs of one widget covering ``span`` units.

    ``fanout`` only matters for splitters: a k-way split is a cascade of
    k-1 two-way splitters and every branch is charged ceil(log2 k) stages.
    """
    kind = WidgetKind(kind)
    if kind in (WidgetKind.JTL2, WidgetKind.JTL3, WidgetKind.JTL4,
                WidgetKind.LONGJTL, WidgetKind.MSL):
        if span < 1:
            raise ValueError("span must be >= 1")
        return span * delays.per_unit(kind)
    if kind is WidgetKind.DRIVER:
        return delays.t_drv
    if kind is WidgetKind.RECEIVER:
        return delays.t_rec
    if kind is WidgetKind.SPLITTER:
        return max(1, math.ceil(math.log2(max(fanout, 2)))) * delays.t_split
    if kind is WidgetKind.CROSS:
        return delays.t_jtl2
    if kind is WidgetKind.VIA:
        return 0
    raise ValueError(f"unknown widget kind {kind}")


def widget_junctions(kind: WidgetKind | str, fanout: int = 2) -> int:
    kind = WidgetKind(kind)
    if kind is WidgetKind.SPLITTER:
        return JUNCTIONS[kind] * max(1, fanout - 1)
    return JUNCTIONS[kind]


# ---------------------------------------------------------------------------
# defaults

DESK_DELAYS_PS = {
    "t_jtl2": 4.0, "t_jtl3": 5.5, "t_jtl4": 7.0, "t_longjtl": 2.5, "t_msl": 0.4,
    "t_drv": 9.0, "t_rec": 8.0, "t_split": 5.0, "l_drv": 1, "l_rec": 1,
}

DESK_GATES = {
    "DFF": {"size": [2, 1], "ports": [["d", 0, "W"], ["q", 0, "E"], ["clk", 0, "S"]],
            "t_delay": 6.0, "t_hold": 1.0, "t_setup": 2.0, "clocked": True, "junctions": 6},
    "AND": {"size": [2, 2], "ports": [["a", 0, "W"], ["b", 1, "W"], ["q", 0, "E"], ["clk", 0, "S"]],
            "t_delay": 7.0, "t_hold": 2.0, "t_setup": 3.0, "clocked": True, "junctions": 11},
    "OR": {"size": [2, 2], "ports": [["a", 0, "W"], ["b", 1, "W"], ["q", 0, "E"], ["clk", 0, "S"]],
           "t_delay": 7.0, "t_hold": 2.0, "t_setup": 3.0, "clocked": True, "junctions": 9},
    "NOT": {"size": [2, 2], "ports": [["a", 0, "W"], ["q", 0, "E"], ["clk", 0, "S"]],
            "t_delay": 9.0, "t_hold": 5.0, "t_setup": 8.2, "clocked": True, "junctions": 9},
    # clock tap: in from the previous bridge, q to the level sub-tree, nx to the next bridge
    "CTAP": {"size": [1, 1], "ports": [["in", 0, "W"], ["nx", 0, "E"], ["q", 0, "N"]],
             "t_delay": 9.0, "t_hold": 0.0, "t_setup": 0.0, "clocked": False, "junctions": 3},
    "IN": {"size": [1, 1], "ports": [["q", 0, "E"]],
           "t_delay": 0.0, "t_hold": 0.0, "t_setup": 0.0, "clocked": False, "junctions": 0},
    "OUT": {"size": [1, 1], "ports": [["a", 0, "W"]],
            "t_delay": 0.0, "t_hold": 0.0, "t_setup": 0.0, "clocked": False, "junctions": 0},
}

LAYER_PROFILES = {
    "nb03": [{"jtl": True, "ptl": True}, {"jtl": True, "ptl": True}],
    "nb04": [{"jtl": True, "ptl": True}, {"jtl": True, "ptl": True},
             {"jtl": False, "ptl": True}, {"jtl": False, "ptl": True}],
}


def default_technology_dict(mode: str = "nb04") -> dict[str, Any]:
    if mode not in LAYER_PROFILES:
        raise TechnologyError(f"unknown layer profile {mode!r}", "mode")
    return {
        "format": "sfqroute-tech/1",
        "name": f"desk-{mode}",
        "pitch_mm": 0.04,
        "layers": [dict(index=i, **spec) for i, spec in enumerate(LAYER_PROFILES[mode])],
        "delays": dict(DESK_DELAYS_PS),
        "gates": json.loads(json.dumps(DESK_GATES)),
    }


def default_technology(mode: str = "nb04") -> Technology:
    return technology_from_dict(default_technology_dict(mode))


# ---------------------------------------------------------------------------
# file format

def _get(d: Mapping[str, Any], key: str, where: str) -> Any:
    if not isinstance(d, Mapping) or key not in d:
        raise TechnologyError("missing", f"{where}.{key}" if where else key)
    return d[key]


def technology_from_dict(doc: Mapping[str, Any]) -> Technology:
    try:
        layers = tuple(
            LayerSpec(int(_get(l, "index", f"layers[{i}]")),
                      bool(_get(l, "jtl", f"layers[{i}]")),
                      bool(_get(l, "ptl", f"layers[{i}]")))
            for i, l in enumerate(_get(doc, "layers", ""))
        )
        d = _get(doc, "delays", "")
        delays = DelayParams(
            **{k: ps_to_fs(_get(d, k, "delays")) for k in
               ("t_jtl2", "t_jtl3", "t_jtl4", "t_longjtl", "t_msl", "t_drv", "t_rec", "t_split")},
            l_drv=int(_get(d, "l_drv", "delays")),
            l_rec=int(_get(d, "l_rec", "delays")),
        )
        gates = {}
        for name, g in _get(doc, "gates", "").items():
            where = f"gates.{name}"
            w, h = _get(g, "size", where)
            ports = tuple(Port(str(p[0]), int(p[1]), str(p[2])) for p in _get(g, "ports", where))
            gates[name] = GateModel(
                name=name, width=int(w), height=int(h), ports=ports,
                t_delay=ps_to_fs(_get(g, "t_delay", where)),
                t_hold=ps_to_fs(_get(g, "t_hold", where)),
                t_setup=ps_to_fs(_get(g, "t_setup", where)),
                clocked=bool(_get(g, "clocked", where)),
                junctions=int(g.get("junctions", 0)),
            )
        tech = Technology(
            name=str(doc.get("name", "unnamed")),
            pitch_mm=float(_get(doc, "pitch_mm", "")),
            layers=layers, delays=delays, gates=gates,
        )
    except TechnologyError:
        raise
    except (TypeError, ValueError) as exc:
        raise TechnologyError(f"malformed technology content: {exc}") from exc
    tech.validate()
    return tech


def load_technology(source: str) -> Technology:
    """Parse technology file content (JSON text)."""
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise TechnologyError(f"parse error: {exc}") from exc
    return technology_from_dict(doc)


def technology_to_dict(tech: Technology) -> dict[str, Any]:
    d = tech.delays
    return {
        "format": "sfqroute-tech/1",
        "name": tech.name,
        "pitch_mm": tech.pitch_mm,
        "layers": [{"index": l.index, "jtl": l.jtl_enabled, "ptl": l.ptl_enabled} for l in tech.layers],
        "delays": {
            **{k: fs_to_ps(getattr(d, k)) for k in
               ("t_jtl2", "t_jtl3", "t_jtl4", "t_longjtl", "t_msl", "t_drv", "t_rec", "t_split")},
            "l_drv": d.l_drv, "l_rec": d.l_rec,
        },
        "gates": {
            name: {
                "size": [g.width, g.height],
                "ports": [[p.name, p.offset, p.side] for p in g.ports],
                "t_delay": fs_to_ps(g.t_delay), "t_hold": fs_to_ps(g.t_hold),
                "t_setup": fs_to_ps(g.t_setup), "clocked": g.clocked, "junctions": g.junctions,
            }
            for name, g in tech.gates.items()
        },
    }


def emit_technology(tech: Technology) -> str:
    return json.dumps(technology_to_dict(tech), indent=2) + "\n"
