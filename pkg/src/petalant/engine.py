"""Deterministic discrete-event engine.

Clock, event queue, random-waypoint mobility, unit-disk radio with
broadcast/unicast delivery, and per-node energy accounting. A single
seeded generator drives all randomness; given the same scenario and seed
two runs produce bit-identical reports and traces.

Draw order: at setup, nodes are initialized in ascending id order (for
each mobile node: position x, position y, waypoint x, waypoint y, speed;
pinned nodes draw nothing). After setup every draw happens inside event
execution, which is totally ordered by (time, insertion sequence).
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass
from enum import Enum

from .geometry import Point
from .metrics import MetricsCollector, MetricsReport
from .routing import (
    DataPacket,
    PBant,
    PFant,
    RouteError,
    Router,
    packet_id,
    packet_kind,
    wire_bytes,
)
from .scenario import Scenario, ScenarioError

# Constant per-hop propagation time; negligible next to serialization.
PROPAGATION_DELAY = 1e-6

# Nodes drawn with zero speed would freeze forever, so speed draws are
# floored here.
MIN_SPEED_FLOOR = 0.1


class EventKind(Enum):
    PACKET_DELIVERY = "packet_delivery"
    MOBILITY_WAYPOINT = "mobility_waypoint"
    EVAPORATION_TICK = "evaporation_tick"
    DISCOVERY_TIMEOUT = "discovery_timeout"
    FLOW_EMIT = "flow_emit"
    ENERGY_SAMPLE = "energy_sample"


@dataclass(slots=True)
class SimEvent:
    time: float
    insertion_seq: int
    kind: EventKind
    node: int
    payload: tuple | None = None


class EventQueue:
    """Min-heap ordered by (time, insertion_seq): total and deterministic."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, SimEvent]] = []
        self._next_seq = 0

    def push(self, time: float, kind: EventKind, node: int, payload=None) -> SimEvent:
        event = SimEvent(time, self._next_seq, kind, node, payload)
        heapq.heappush(self._heap, (time, self._next_seq, event))
        self._next_seq += 1
        return event

    def pop(self) -> SimEvent:
        return heapq.heappop(self._heap)[2]

    def peek_time(self) -> float:
        return self._heap[0][0]

    def __len__(self) -> int:
        return len(self._heap)

    def remaining(self):
        return [entry[2] for entry in sorted(self._heap)]


@dataclass(slots=True)
class NodeRuntime:
    """Motion and energy state of one node.

    Motion is lazy: position is interpolated from the current leg, and
    only waypoint arrivals are events. tx/rx durations accumulate as
    transmissions happen; idle time is whatever remains.
    """

    id: int
    static: bool
    origin_x: float
    origin_y: float
    vx: float = 0.0
    vy: float = 0.0
    leg_start: float = 0.0
    arrival: float = math.inf
    waypoint_x: float = 0.0
    waypoint_y: float = 0.0
    speed: float = 0.0
    tx_dur: float = 0.0
    rx_dur: float = 0.0

    def position_xy(self, now: float) -> tuple[float, float]:
        t = self.arrival if now > self.arrival else now
        dt = t - self.leg_start
        if dt <= 0.0:
            return self.origin_x, self.origin_y
        return self.origin_x + self.vx * dt, self.origin_y + self.vy * dt


@dataclass
class RunResult:
    report: MetricsReport
    trace: list | None


class Simulation:
    """One run over one scenario; also the network environment for routers."""

    def __init__(self, scenario: Scenario, trace: bool = False):
        problems = scenario.validate()
        if problems:
            raise ScenarioError(problems)
        self.scenario = scenario
        self.rng = random.Random(scenario.rng_seed)
        self.collector = MetricsCollector(
            scenario.name, scenario.protocol.policy.value, scenario.rng_seed,
            scenario.sim_time, scenario.packet_size, trace=trace)
        self.queue = EventQueue()
        self._now = 0.0
        self._range_sq = scenario.tx_range * scenario.tx_range
        self._data_in_flight = 0
        self._finished = False

        self.nodes: list[NodeRuntime] = []
        for node_id in range(scenario.node_count):
            pinned = scenario.static_positions.get(node_id)
            if pinned is not None:
                self.nodes.append(NodeRuntime(node_id, True, pinned.x, pinned.y))
            else:
                x = self.rng.uniform(0.0, scenario.area_width)
                y = self.rng.uniform(0.0, scenario.area_height)
                node = NodeRuntime(node_id, False, x, y)
                self._draw_leg(node, 0.0)
                self.nodes.append(node)

        self.routers = [Router(n.id, scenario.protocol, self, self.collector)
                        for n in self.nodes]

        for index, flow in enumerate(scenario.flows):
            if flow.start < scenario.sim_time:
                self.queue.push(flow.start, EventKind.FLOW_EMIT, flow.src, (index, 0))
        tick = scenario.protocol.evaporation_tick
        if tick <= scenario.sim_time:
            self.queue.push(tick, EventKind.EVAPORATION_TICK, -1, (1,))

    # -- mobility --------------------------------------------------------------

    def _draw_leg(self, node: NodeRuntime, start: float) -> None:
        """Draw the next waypoint and speed; schedule the arrival."""
        scn = self.scenario
        node.waypoint_x = self.rng.uniform(0.0, scn.area_width)
        node.waypoint_y = self.rng.uniform(0.0, scn.area_height)
        node.speed = self.rng.uniform(max(MIN_SPEED_FLOOR, scn.speed_min),
                                      max(MIN_SPEED_FLOOR, scn.speed_max))
        dx = node.waypoint_x - node.origin_x
        dy = node.waypoint_y - node.origin_y
        leg_length = math.hypot(dx, dy)
        node.leg_start = start
        if leg_length == 0.0:
            node.vx = node.vy = 0.0
            node.arrival = start
        else:
            travel = leg_length / node.speed
            node.vx = dx / travel
            node.vy = dy / travel
            node.arrival = start + travel
        self.queue.push(node.arrival, EventKind.MOBILITY_WAYPOINT, node.id)

    def rwp_step(self, node: NodeRuntime, now: float) -> None:
        """Waypoint reached: pause, then draw a fresh leg."""
        if node.static:
            return
        node.origin_x = node.waypoint_x
        node.origin_y = node.waypoint_y
        self.collector.note(now, node.id, "waypoint",
                            value=f"{node.origin_x!r} {node.origin_y!r}", note="arrive")
        self._draw_leg(node, now + self.scenario.pause_time)

    def teleport(self, node_id: int, position: Point) -> None:
        """Pin a node at a new position (scripted topology changes)."""
        node = self.nodes[node_id]
        node.static = True
        node.origin_x = position.x
        node.origin_y = position.y
        node.vx = node.vy = 0.0
        node.leg_start = 0.0
        node.arrival = math.inf

    # -- network environment for routers ---------------------------------------

    def now(self) -> float:
        return self._now

    def position(self, node_id: int) -> Point:
        x, y = self.nodes[node_id].position_xy(self._now)
        return Point(x, y)

    def neighbors(self, node_id: int) -> list[int]:
        """Unit disk: every other node within tx_range right now."""
        now = self._now
        ox, oy = self.nodes[node_id].position_xy(now)
        nearby = []
        for node in self.nodes:
            if node.id == node_id:
                continue
            x, y = node.position_xy(now)
            dx = x - ox
            dy = y - oy
            if dx * dx + dy * dy <= self._range_sq:
                nearby.append(node.id)
        return nearby

    def _tx_duration(self, packet) -> float:
        return wire_bytes(packet) * 8 / self.scenario.data_rate

    def broadcast(self, sender: int, packet) -> None:
        duration = self._tx_duration(packet)
        self.nodes[sender].tx_dur += duration
        kind = packet_kind(packet)
        src, dst, hops = _packet_fields(packet)
        self.collector.transmit(sender, kind, packet_id(packet), src, dst, hops,
                                "broadcast", self._now)
        arrival = self._now + duration + PROPAGATION_DELAY
        for receiver in self.neighbors(sender):
            if kind == "data":
                self._data_in_flight += 1
            self.queue.push(arrival, EventKind.PACKET_DELIVERY, receiver,
                            (packet, sender, duration))

    def unicast(self, sender: int, target: int, packet) -> None:
        duration = self._tx_duration(packet)
        self.nodes[sender].tx_dur += duration
        kind = packet_kind(packet)
        src, dst, hops = _packet_fields(packet)
        now = self._now
        sx, sy = self.nodes[sender].position_xy(now)
        tx, ty = self.nodes[target].position_xy(now)
        dx = tx - sx
        dy = ty - sy
        if dx * dx + dy * dy <= self._range_sq:
            self.collector.transmit(sender, kind, packet_id(packet), src, dst, hops,
                                    f"unicast:{target}", now)
            if kind == "data":
                self._data_in_flight += 1
            self.queue.push(now + duration + PROPAGATION_DELAY,
                            EventKind.PACKET_DELIVERY, target,
                            (packet, sender, duration))
        else:
            # The frame went out but nobody is there: the link is broken.
            self.collector.transmit(sender, kind, packet_id(packet), src, dst, hops,
                                    f"unicast_failed:{target}", now)
            self.routers[sender].on_link_break(target, packet)

    def arm_discovery_timer(self, node: int, dst: int, seq: int, delay: float) -> None:
        self.queue.push(self._now + delay, EventKind.DISCOVERY_TIMEOUT, node, (dst, seq))

    # -- event dispatch -----------------------------------------------------------

    def _execute(self, event: SimEvent) -> None:
        kind = event.kind
        if kind is EventKind.PACKET_DELIVERY:
            packet, sender, duration = event.payload
            node = self.nodes[event.node]
            node.rx_dur += duration
            router = self.routers[event.node]
            if isinstance(packet, DataPacket):
                self._data_in_flight -= 1
                decision = router.on_data(packet, received_from=sender)
            elif isinstance(packet, PFant):
                decision = router.on_pfant(packet)
            elif isinstance(packet, PBant):
                decision = router.on_pbant(packet)
            else:
                decision = router.on_route_error(packet, received_from=sender)
            self.collector.decision(self._now, event.node, packet_kind(packet),
                                    packet_id(packet), decision.value)
        elif kind is EventKind.FLOW_EMIT:
            index, seq = event.payload
            flow = self.scenario.flows[index]
            pkt = DataPacket(index, seq, flow.src, flow.dst,
                             created_at=self._now, size=self.scenario.packet_size)
            self.collector.flow_emit(pkt, self._now)
            self.routers[flow.src].on_data(pkt)
            next_time = flow.start + (seq + 1) / flow.rate
            if next_time < self.scenario.sim_time:
                self.queue.push(next_time, EventKind.FLOW_EMIT, flow.src,
                                (index, seq + 1))
        elif kind is EventKind.MOBILITY_WAYPOINT:
            self.rwp_step(self.nodes[event.node], self._now)
        elif kind is EventKind.EVAPORATION_TICK:
            for router in self.routers:
                router.evaporate(self._now)
            self.collector.note(self._now, -1, "evaporation")
            (count,) = event.payload
            next_time = (count + 1) * self.scenario.protocol.evaporation_tick
            if next_time <= self.scenario.sim_time:
                self.queue.push(next_time, EventKind.EVAPORATION_TICK, -1, (count + 1,))
        elif kind is EventKind.DISCOVERY_TIMEOUT:
            dst, seq = event.payload
            outcome = self.routers[event.node].on_discovery_timeout(dst, seq)
            if outcome is not None:
                self.collector.note(self._now, event.node, "timeout",
                                    value=str(dst), note=outcome)
        elif kind is EventKind.ENERGY_SAMPLE:
            self._sample_energy(event.node)

    def _sample_energy(self, node_id: int) -> None:
        scn = self.scenario
        node = self.nodes[node_id]
        idle = scn.sim_time - node.tx_dur - node.rx_dur
        joules = (node.tx_dur * scn.tx_power + node.rx_dur * scn.rx_power
                  + idle * scn.idle_power)
        self.collector.energy_sample(node_id, node.tx_dur, node.rx_dur, idle,
                                     joules, self._now)

    def energy_consumed(self, node_id: int, now: float | None = None) -> float:
        """Closed-form consumption: durations times the configured powers."""
        if now is None:
            now = self._now
        scn = self.scenario
        node = self.nodes[node_id]
        idle = now - node.tx_dur - node.rx_dur
        return (node.tx_dur * scn.tx_power + node.rx_dur * scn.rx_power
                + idle * scn.idle_power)

    # -- main loop ---------------------------------------------------------------

    def run_until(self, t: float) -> None:
        """Execute every event with time <= t, in (time, seq) order."""
        horizon = min(t, self.scenario.sim_time)
        queue = self.queue
        while len(queue) and queue.peek_time() <= horizon:
            event = queue.pop()
            self._now = event.time
            self._execute(event)
        self._now = horizon

    def finish(self) -> RunResult:
        if self._finished:
            raise RuntimeError("finish() called twice")
        self._finished = True
        end = self.scenario.sim_time
        self._now = end
        # Packets still on the air never land; they drain into the drop
        # counters so the conservation identity holds at end of run.
        for event in self.queue.remaining():
            if event.kind is EventKind.PACKET_DELIVERY:
                packet = event.payload[0]
                if isinstance(packet, DataPacket):
                    self.collector.data_dropped(packet, "end_of_run", end, event.node)
        for router in self.routers:
            for pkt in router.buffered_packets():
                self.collector.data_still_buffered(pkt, end, router.node_id)
        for node in self.nodes:
            self.queue.push(end, EventKind.ENERGY_SAMPLE, node.id)
        while len(self.queue) and self.queue.peek_time() <= end:
            event = self.queue.pop()
            if event.kind is EventKind.ENERGY_SAMPLE:
                self._execute(event)
        return RunResult(self.collector.report(), self.collector.rows)

    def run(self) -> RunResult:
        self.run_until(self.scenario.sim_time)
        return self.finish()

    # -- inspection ----------------------------------------------------------------

    def conservation_snapshot(self) -> dict[str, int]:
        """Live packet accounting; sent must equal the sum of the rest."""
        counters = self.collector.counters
        dropped = sum(v for k, v in counters.items() if k.startswith("drop_"))
        buffered = sum(len(r.buffered_packets()) for r in self.routers)
        return {
            "sent": counters.get("data_sent", 0),
            "delivered": counters.get("data_delivered", 0),
            "dropped": dropped,
            "buffered": buffered,
            "in_flight": self._data_in_flight,
        }


def _packet_fields(packet):
    if isinstance(packet, DataPacket):
        return packet.src, packet.dst, packet.hops
    if isinstance(packet, PFant):
        return packet.src, packet.dst, packet.hop_count
    if isinstance(packet, PBant):
        return packet.src, packet.dst, packet.hops_from_dst
    return packet.origin_src, packet.unreachable_dst, packet.hops


def run(scenario: Scenario, trace: bool = False) -> RunResult:
    """Run one scenario to completion; deterministic in (scenario, seed)."""
    return Simulation(scenario, trace=trace).run()
