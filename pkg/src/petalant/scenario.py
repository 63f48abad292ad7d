"""Experiment configuration and the scenario file format.

A scenario file is flat ``key = value`` text. Blank lines and lines
starting with ``#`` are skipped; unknown keys are errors. ``flow`` and
``static_node`` may repeat:

    node_count = 50
    area = 1000x1000
    tx_range = 250
    sim_time = 160
    flow = 0 1 5.0 25          # src dst start_s rate_pkts_per_s
    static_node = 7 500 500    # node_id x y  (pinned, never moves)

Scalar overrides use the same keys; overriding a repeatable key replaces
the whole list, with ``;`` separating entries.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .geometry import Point
from .routing import Policy, ProtocolConfig


class ScenarioError(ValueError):
    """Configuration rejected before any event runs."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass(slots=True)
class Flow:
    src: int
    dst: int
    start: float
    rate: float  # packets per second


@dataclass
class Scenario:
    """All parameters of one run; defaults follow the desk-scale setup."""

    name: str = "scenario"
    node_count: int = 50
    area_width: float = 1000.0
    area_height: float = 1000.0
    tx_range: float = 250.0
    sim_time: float = 160.0
    speed_min: float = 0.0
    speed_max: float = 10.0
    pause_time: float = 0.0
    data_rate: float = 2_000_000.0  # link bitrate, bits/s
    packet_size: int = 512  # bytes
    initial_energy: float = 100.0  # joules, accounting only
    tx_power: float = 31.32e-3  # watts
    rx_power: float = 35.28e-3
    idle_power: float = 712e-6
    rng_seed: int = 1
    flows: list[Flow] = field(default_factory=list)
    static_positions: dict[int, Point] = field(default_factory=dict)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)

    def clone(self) -> "Scenario":
        return copy.deepcopy(self)

    def validate(self) -> list[str]:
        problems = []
        if self.node_count < 2:
            problems.append("node_count must be at least 2")
        if self.area_width <= 0 or self.area_height <= 0:
            problems.append("area dimensions must be > 0")
        if self.tx_range <= 0:
            problems.append("tx_range must be > 0")
        if self.sim_time <= 0:
            problems.append("sim_time must be > 0")
        if self.speed_min < 0:
            problems.append("speed_min must be >= 0")
        if self.speed_max < self.speed_min:
            problems.append("speed_max must be >= speed_min")
        if self.pause_time < 0:
            problems.append("pause_time must be >= 0")
        if self.data_rate <= 0:
            problems.append("data_rate must be > 0")
        if self.packet_size <= 0:
            problems.append("packet_size must be > 0")
        if self.initial_energy < 0:
            problems.append("initial_energy must be >= 0")
        for label, power in (("tx_power", self.tx_power), ("rx_power", self.rx_power),
                             ("idle_power", self.idle_power)):
            if power < 0:
                problems.append(f"{label} must be >= 0")
        for i, flow in enumerate(self.flows):
            if not (0 <= flow.src < self.node_count):
                problems.append(f"flow {i}: src {flow.src} out of range")
            if not (0 <= flow.dst < self.node_count):
                problems.append(f"flow {i}: dst {flow.dst} out of range")
            if flow.src == flow.dst:
                problems.append(f"flow {i}: src and dst are the same node")
            if flow.rate <= 0:
                problems.append(f"flow {i}: rate must be > 0")
            if flow.start < 0:
                problems.append(f"flow {i}: start must be >= 0")
        for node_id, pos in self.static_positions.items():
            if not (0 <= node_id < self.node_count):
                problems.append(f"static_node {node_id} out of range")
            elif not (0 <= pos.x <= self.area_width and 0 <= pos.y <= self.area_height):
                problems.append(f"static_node {node_id} lies outside the area")
        problems.extend(self.protocol.validate())
        return problems

    def key_values(self) -> list[tuple[str, str]]:
        """Canonical (key, value) pairs for config echo headers."""
        p = self.protocol
        pairs = [
            ("node_count", str(self.node_count)),
            ("area", f"{_num(self.area_width)}x{_num(self.area_height)}"),
            ("tx_range", _num(self.tx_range)),
            ("sim_time", _num(self.sim_time)),
            ("speed_min", _num(self.speed_min)),
            ("speed_max", _num(self.speed_max)),
            ("pause_time", _num(self.pause_time)),
            ("data_rate", _num(self.data_rate)),
            ("packet_size", str(self.packet_size)),
            ("initial_energy", _num(self.initial_energy)),
            ("tx_power", _num(self.tx_power)),
            ("rx_power", _num(self.rx_power)),
            ("idle_power", _num(self.idle_power)),
            ("rng_seed", str(self.rng_seed)),
            ("protocol", p.policy.value),
            ("width_ratio", _num(p.width_ratio)),
            ("petal_margin", _num(p.petal_margin)),
            ("initial_pheromone", _num(p.initial_pheromone)),
            ("evaporation_rate", _num(p.evaporation_rate)),
            ("evaporation_tick", _num(p.evaporation_tick)),
            ("min_pheromone", _num(p.min_pheromone)),
            ("discovery_timeout", _num(p.discovery_timeout)),
            ("max_retries", str(p.max_retries)),
            ("data_reinforcement", _num(p.data_reinforcement)),
            ("buffer_limit", str(p.buffer_limit)),
            ("max_hops", str(p.max_hops)),
        ]
        for flow in self.flows:
            pairs.append(("flow", f"{flow.src} {flow.dst} {_num(flow.start)} {_num(flow.rate)}"))
        for node_id in sorted(self.static_positions):
            pos = self.static_positions[node_id]
            pairs.append(("static_node", f"{node_id} {_num(pos.x)} {_num(pos.y)}"))
        return pairs


def _num(value: float) -> str:
    return repr(float(value))


def _parse_float(key, token):
    try:
        return float(token)
    except ValueError:
        raise ScenarioError([f"invalid value for {key!r}: {token!r}"]) from None


def _parse_int(key, token):
    try:
        return int(token)
    except ValueError:
        raise ScenarioError([f"invalid value for {key!r}: {token!r}"]) from None


def _set_area(scn, key, token):
    parts = token.replace("x", " ").replace("X", " ").split()
    if len(parts) != 2:
        raise ScenarioError([f"invalid value for 'area': {token!r} (expected WIDTHxHEIGHT)"])
    scn.area_width = _parse_float(key, parts[0])
    scn.area_height = _parse_float(key, parts[1])


def _set_protocol(scn, key, token):
    try:
        scn.protocol.policy = Policy(token.strip().lower())
    except ValueError:
        names = ", ".join(p.value for p in Policy)
        raise ScenarioError([f"invalid value for 'protocol': {token!r} (one of {names})"]) from None


def _add_flow(scn, key, token):
    parts = token.split()
    if len(parts) != 4:
        raise ScenarioError([f"invalid value for 'flow': {token!r} (expected 'src dst start rate')"])
    scn.flows.append(Flow(_parse_int(key, parts[0]), _parse_int(key, parts[1]),
                          _parse_float(key, parts[2]), _parse_float(key, parts[3])))


def _add_static_node(scn, key, token):
    parts = token.split()
    if len(parts) != 3:
        raise ScenarioError([f"invalid value for 'static_node': {token!r} (expected 'id x y')"])
    scn.static_positions[_parse_int(key, parts[0])] = Point(
        _parse_float(key, parts[1]), _parse_float(key, parts[2]))


def _scalar(attr, caster, on_protocol=False):
    def setter(scn, key, token):
        target = scn.protocol if on_protocol else scn
        setattr(target, attr, caster(key, token))
    return setter


_SETTERS = {
    "node_count": _scalar("node_count", _parse_int),
    "area": _set_area,
    "tx_range": _scalar("tx_range", _parse_float),
    "sim_time": _scalar("sim_time", _parse_float),
    "speed_min": _scalar("speed_min", _parse_float),
    "speed_max": _scalar("speed_max", _parse_float),
    "pause_time": _scalar("pause_time", _parse_float),
    "data_rate": _scalar("data_rate", _parse_float),
    "packet_size": _scalar("packet_size", _parse_int),
    "initial_energy": _scalar("initial_energy", _parse_float),
    "tx_power": _scalar("tx_power", _parse_float),
    "rx_power": _scalar("rx_power", _parse_float),
    "idle_power": _scalar("idle_power", _parse_float),
    "rng_seed": _scalar("rng_seed", _parse_int),
    "protocol": _set_protocol,
    "width_ratio": _scalar("width_ratio", _parse_float, on_protocol=True),
    "petal_margin": _scalar("petal_margin", _parse_float, on_protocol=True),
    "initial_pheromone": _scalar("initial_pheromone", _parse_float, on_protocol=True),
    "evaporation_rate": _scalar("evaporation_rate", _parse_float, on_protocol=True),
    "evaporation_tick": _scalar("evaporation_tick", _parse_float, on_protocol=True),
    "min_pheromone": _scalar("min_pheromone", _parse_float, on_protocol=True),
    "discovery_timeout": _scalar("discovery_timeout", _parse_float, on_protocol=True),
    "max_retries": _scalar("max_retries", _parse_int, on_protocol=True),
    "data_reinforcement": _scalar("data_reinforcement", _parse_float, on_protocol=True),
    "buffer_limit": _scalar("buffer_limit", _parse_int, on_protocol=True),
    "max_hops": _scalar("max_hops", _parse_int, on_protocol=True),
    "flow": _add_flow,
    "static_node": _add_static_node,
}

REPEATABLE_KEYS = ("flow", "static_node")
KNOWN_KEYS = tuple(_SETTERS)


def apply_key(scenario: Scenario, key: str, value: str) -> None:
    setter = _SETTERS.get(key)
    if setter is None:
        raise ScenarioError([f"unknown key {key!r}"])
    setter(scenario, key, value.strip())


def parse_scenario_text(text: str, name: str = "scenario") -> Scenario:
    scenario = Scenario(name=name)
    problems = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            problems.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        try:
            apply_key(scenario, key.strip(), value)
        except ScenarioError as exc:
            problems.extend(f"line {lineno}: {d}" for d in exc.diagnostics)
    if problems:
        raise ScenarioError(problems)
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario_text(path.read_text(), name=path.stem)


def apply_overrides(scenario: Scenario, overrides: dict[str, str]) -> Scenario:
    """Apply key=value overrides on top of a loaded scenario.

    Repeatable keys are replaced wholesale; separate entries with ';'.
    """
    for key, value in overrides.items():
        if key in REPEATABLE_KEYS:
            if key == "flow":
                scenario.flows = []
            else:
                scenario.static_positions = {}
            for chunk in value.split(";"):
                if chunk.strip():
                    apply_key(scenario, key, chunk)
        else:
            apply_key(scenario, key, value)
    return scenario


def bundled_scenario_path(name: str) -> Path | None:
    """Resolve a bundled scenario by bare name ('env_a') or file name."""
    stem = name[:-4] if name.endswith(".scn") else name
    candidate = resources.files("petalant").joinpath(f"scenarios/{stem}.scn")
    if candidate.is_file():
        return Path(str(candidate))
    return None


def resolve_scenario(path_or_name: str) -> Path:
    """A real path wins; otherwise fall back to the bundled scenarios."""
    path = Path(path_or_name)
    if path.is_file():
        return path
    bundled = bundled_scenario_path(path_or_name)
    if bundled is not None:
        return bundled
    raise ScenarioError([f"scenario file not found: {path_or_name!r}"])
