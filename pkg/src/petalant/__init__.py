"""Deterministic MANET simulator with petal-constrained ant route discovery."""

from .engine import EventKind, EventQueue, RunResult, SimEvent, Simulation, run
from .geometry import (
    DegeneratePetal,
    PetalRegion,
    Point,
    build_petal,
    contains,
    distance,
    midpoint,
    petal_area,
)
from .metrics import (
    MetricsCollector,
    MetricsReport,
    compute_delay,
    compute_overhead,
    compute_pdf,
    compute_throughput,
    replay_report_file,
)
from .routing import (
    DataPacket,
    Decision,
    PBant,
    PFant,
    PheromoneEntry,
    PheromoneTable,
    Policy,
    ProtocolConfig,
    RouteError,
    Router,
    select_next_hop,
)
from .scenario import Flow, Scenario, ScenarioError, load_scenario

__all__ = [
    "DataPacket",
    "Decision",
    "DegeneratePetal",
    "EventKind",
    "EventQueue",
    "Flow",
    "MetricsCollector",
    "MetricsReport",
    "PBant",
    "PFant",
    "PetalRegion",
    "PheromoneEntry",
    "PheromoneTable",
    "Point",
    "Policy",
    "ProtocolConfig",
    "RouteError",
    "Router",
    "RunResult",
    "Scenario",
    "ScenarioError",
    "SimEvent",
    "Simulation",
    "build_petal",
    "compute_delay",
    "compute_overhead",
    "compute_pdf",
    "compute_throughput",
    "contains",
    "distance",
    "load_scenario",
    "midpoint",
    "petal_area",
    "replay_report_file",
    "run",
    "select_next_hop",
]
