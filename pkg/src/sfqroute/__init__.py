"""Hybrid JTL/PTL routing for clocked single-flux-quantum layouts."""

from .techlib import Technology, WidgetKind, default_technology, load_technology
from .design import Design, load_design
from .flow import FlowConfig, RoutingReport, run_flow

__version__ = "0.1.0"

__all__ = ["Technology", "WidgetKind", "default_technology", "load_technology", "Design",
           "load_design", "FlowConfig", "RoutingReport", "run_flow", "__version__"]
