"""Per-node routing state machines for ant-style route discovery.

Three forwarding policies share one state machine:

* ``par``   - zone-restricted discovery: only nodes inside the elliptical
  petal between source and destination rebroadcast a forward ant.
* ``cnb``   - controlled neighbor broadcast: each transmitter designates
  exactly one random neighbor as the next rebroadcaster.
* ``flood`` - blind flooding: every node rebroadcasts each new forward
  ant exactly once.

Forward ants lay reverse pheromone toward the source as they spread; the
destination answers the first copy with a backward ant that retraces the
reverse trail and installs forward pheromone. Data packets follow the
highest-pheromone next hop and reinforce the entries they use; periodic
evaporation decays every entry and prunes the stale ones. On a broken
link a node fails over to an alternative entry when one exists, otherwise
it reports a route error back to the source, which re-discovers.

Routers are driven entirely by a network environment object (the
simulator, or a stub in tests) providing: ``now()``, ``position(node)``,
``neighbors(node)``, ``rng``, ``broadcast(sender, packet)``,
``unicast(sender, target, packet)`` and
``arm_discovery_timer(node, dst, seq, delay)``. A failed unicast must
call the sender's ``on_link_break`` with the undeliverable packet.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum

from .geometry import DegeneratePetal, PetalRegion, Point, build_petal, contains

NodeId = int

# Route requests, replies and error reports travel as small fixed-size
# frames; the size only matters for serialization time and energy.
CONTROL_PACKET_BYTES = 64


class Policy(Enum):
    PAR = "par"
    CNB = "cnb"
    FLOOD = "flood"


@dataclass(frozen=True, slots=True)
class PFant:
    """Forward ant: the route-request broadcast from a source.

    Carries the full petal parameters so receivers can run the membership
    test; an area value alone would not suffice. ``designated`` names the
    single neighbor allowed to rebroadcast under the cnb policy and is
    ignored otherwise.
    """

    seq: int
    src: NodeId
    src_pos: Point
    dst: NodeId
    dst_pos: Point
    petal: PetalRegion
    hop_count: int = 0
    prev_hop: NodeId = -1
    designated: NodeId | None = None


@dataclass(frozen=True, slots=True)
class PBant:
    """Backward ant: the route reply walking the reverse trail to the source."""

    seq: int
    src: NodeId  # discovery originator the reply travels toward
    dst: NodeId  # discovery target that generated the reply
    hops_from_dst: int = 0
    prev_hop: NodeId = -1


@dataclass(frozen=True, slots=True)
class RouteError:
    """Report that a destination became unreachable at ``reporter``."""

    unreachable_dst: NodeId
    reporter: NodeId
    origin_src: NodeId
    hops: int = 0


@dataclass(frozen=True, slots=True)
class DataPacket:
    flow: int
    seq: int
    src: NodeId
    dst: NodeId
    created_at: float
    size: int
    hops: int = 0

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise ValueError("packet size must be positive")


def wire_bytes(packet) -> int:
    """Bytes on the air for serialization/energy accounting."""
    if isinstance(packet, DataPacket):
        return packet.size
    return CONTROL_PACKET_BYTES


def packet_kind(packet) -> str:
    if isinstance(packet, PFant):
        return "pfant"
    if isinstance(packet, PBant):
        return "pbant"
    if isinstance(packet, RouteError):
        return "rerr"
    return "data"


def packet_id(packet) -> str:
    if isinstance(packet, DataPacket):
        return f"{packet.flow}:{packet.seq}"
    if isinstance(packet, (PFant, PBant)):
        return f"{packet.src}:{packet.seq}"
    return f"{packet.origin_src}:{packet.unreachable_dst}"


@dataclass(slots=True)
class PheromoneEntry:
    next_hop: NodeId
    pheromone: float
    last_updated: float


class PheromoneTable:
    """Per-destination next-hop entries with pheromone level and freshness."""

    def __init__(self) -> None:
        self._entries: dict[NodeId, dict[NodeId, PheromoneEntry]] = {}

    def entries_for(self, dst: NodeId) -> list[PheromoneEntry]:
        return list(self._entries.get(dst, {}).values())

    def destinations(self) -> list[NodeId]:
        return list(self._entries)

    def get(self, dst: NodeId, next_hop: NodeId) -> PheromoneEntry | None:
        return self._entries.get(dst, {}).get(next_hop)

    def _store(self, dst, entry, floor):
        # An entry below the prune threshold never exists in the table.
        if entry.pheromone < floor:
            self.remove(dst, entry.next_hop)
        else:
            self._entries.setdefault(dst, {})[entry.next_hop] = entry

    def set_level(self, dst, next_hop, level, now, floor=0.0):
        existing = self.get(dst, next_hop)
        if existing is not None:
            existing.pheromone = level
            existing.last_updated = now
            self._store(dst, existing, floor)
        else:
            self._store(dst, PheromoneEntry(next_hop, level, now), floor)

    def deposit(self, dst, next_hop, amount, now, floor=0.0):
        existing = self.get(dst, next_hop)
        if existing is None:
            self._store(dst, PheromoneEntry(next_hop, amount, now), floor)
        else:
            existing.pheromone += amount
            existing.last_updated = now

    def remove(self, dst, next_hop) -> None:
        hops = self._entries.get(dst)
        if hops is not None:
            hops.pop(next_hop, None)
            if not hops:
                del self._entries[dst]

    def prune_next_hop(self, next_hop: NodeId) -> None:
        """Remove every entry through a dead neighbor, for all destinations."""
        for dst in list(self._entries):
            self.remove(dst, next_hop)

    def evaporate(self, rate: float, floor: float) -> None:
        """Multiply every pheromone by (1 - rate); prune entries below floor."""
        keep = 1.0 - rate
        for dst in list(self._entries):
            hops = self._entries[dst]
            for next_hop in list(hops):
                entry = hops[next_hop]
                entry.pheromone *= keep
                if entry.pheromone < floor:
                    del hops[next_hop]
            if not hops:
                del self._entries[dst]

    def __len__(self) -> int:
        return sum(len(h) for h in self._entries.values())


def select_next_hop(table: PheromoneTable, dst: NodeId) -> NodeId | None:
    """Highest-pheromone next hop for dst, ties to the lowest node id."""
    entries = table.entries_for(dst)
    if not entries:
        return None
    best = max(entries, key=lambda e: (e.pheromone, -e.next_hop))
    return best.next_hop


@dataclass(slots=True)
class ProtocolConfig:
    policy: Policy = Policy.PAR
    width_ratio: float = 0.5
    petal_margin: float = 1.0
    initial_pheromone: float = 1.0
    evaporation_rate: float = 0.1
    evaporation_tick: float = 1.0
    min_pheromone: float = 0.01
    discovery_timeout: float = 2.0
    max_retries: int = 3
    data_reinforcement: float = 0.05
    buffer_limit: int = 64
    max_hops: int = 64

    def validate(self) -> list[str]:
        problems = []
        if not 0.0 < self.evaporation_rate < 1.0:
            problems.append("evaporation_rate must be in (0, 1)")
        if not self.min_pheromone < self.initial_pheromone:
            problems.append("min_pheromone must be below initial_pheromone")
        if self.discovery_timeout <= 0:
            problems.append("discovery_timeout must be > 0")
        if not 0.0 < self.width_ratio <= 1.0:
            problems.append("width_ratio must be in (0, 1]")
        if self.petal_margin < 0:
            problems.append("petal_margin must be >= 0")
        if self.evaporation_tick <= 0:
            problems.append("evaporation_tick must be > 0")
        if self.max_retries < 0:
            problems.append("max_retries must be >= 0")
        if self.buffer_limit < 1:
            problems.append("buffer_limit must be >= 1")
        if self.max_hops < 1:
            problems.append("max_hops must be >= 1")
        if self.data_reinforcement < 0:
            problems.append("data_reinforcement must be >= 0")
        if self.initial_pheromone <= 0:
            problems.append("initial_pheromone must be > 0")
        return problems


class Decision(Enum):
    """What a handler did with a packet; recorded in the trace."""

    REBROADCAST = "rebroadcast"
    GENERATE_BANT = "generate_bant"
    DROP_DUPLICATE = "drop_duplicate"
    DROP_OUTSIDE_PETAL = "drop_outside_petal"
    DROP_NOT_DESIGNATED = "drop_not_designated"
    DROP_MALFORMED = "drop_malformed"
    FORWARD = "forward"
    ACTIVATE_ROUTE = "activate_route"
    DROP_ORPHAN = "drop_orphan"
    DROP_TTL = "drop_ttl"
    DELIVER = "deliver"
    BUFFER = "buffer"
    EMIT_ERROR = "emit_route_error"
    REROUTE = "reroute"
    PRUNE_ONLY = "prune_only"
    REDISCOVER = "rediscover"
    IGNORE_STALE = "ignore_stale"
    DROP_UNROUTABLE = "drop_unroutable"


@dataclass(slots=True)
class _Discovery:
    seq: int
    retries: int = 0


def _petal_ok(petal) -> bool:
    try:
        return (
            math.isfinite(petal.center.x)
            and math.isfinite(petal.center.y)
            and math.isfinite(petal.semi_major)
            and math.isfinite(petal.semi_minor)
            and math.isfinite(petal.orientation)
            and petal.semi_major > 0
            and petal.semi_minor > 0
        )
    except AttributeError:
        return False


class Router:
    """Routing state machine for one node, driven by the event loop.

    Strictly sequential: the environment must serialize all deliveries in
    timestamp order and never call two handlers concurrently.
    """

    def __init__(self, node_id: NodeId, config: ProtocolConfig, net, metrics):
        self.node_id = node_id
        self.config = config
        self.net = net
        self.metrics = metrics
        self.table = PheromoneTable()
        self.seen: set[tuple[NodeId, int]] = set()
        self.pending: dict[NodeId, _Discovery] = {}
        self.buffers: dict[int, deque[DataPacket]] = {}
        self._next_seq = 0

    # -- discovery -----------------------------------------------------------

    def start_discovery(self, dst: NodeId, dst_pos: Point) -> PFant | None:
        """Broadcast a fresh forward ant toward dst and arm the retry timer.

        A discovery already pending for dst suppresses the call. Coincident
        source and destination positions degenerate to a direct one-hop
        route instead of a zone broadcast.
        """
        if dst in self.pending:
            return None
        now = self.net.now()
        self_pos = self.net.position(self.node_id)
        try:
            petal = build_petal(self_pos, dst_pos,
                                self.config.width_ratio, self.config.petal_margin)
        except DegeneratePetal:
            self.table.set_level(dst, dst, self.config.initial_pheromone, now,
                                 self.config.min_pheromone)
            self._flush_buffers(dst)
            return None
        self._next_seq += 1
        seq = self._next_seq
        fant = PFant(
            seq=seq,
            src=self.node_id,
            src_pos=self_pos,
            dst=dst,
            dst_pos=dst_pos,
            petal=petal,
            hop_count=0,
            prev_hop=self.node_id,
            designated=self._designate(),
        )
        self.seen.add((self.node_id, seq))
        self.pending[dst] = _Discovery(seq=seq)
        self.metrics.bump("discoveries_started", now, self.node_id)
        self.net.broadcast(self.node_id, fant)
        self.net.arm_discovery_timer(self.node_id, dst, seq, self.config.discovery_timeout)
        return fant

    def on_discovery_timeout(self, dst: NodeId, seq: int) -> str | None:
        """Retry with a fresh sequence number, or fail the discovery."""
        disc = self.pending.get(dst)
        if disc is None or disc.seq != seq:
            return None  # reply already arrived, or a newer attempt owns the timer
        now = self.net.now()
        if disc.retries >= self.config.max_retries:
            del self.pending[dst]
            self.metrics.bump("discoveries_failed", now, self.node_id)
            for pkt in self._take_buffered(dst):
                self.metrics.data_dropped(pkt, "discovery_failed", now, self.node_id)
            return "failed"
        retries = disc.retries + 1
        del self.pending[dst]
        refant = self.start_discovery(dst, self.net.position(dst))
        if refant is not None:
            self.pending[dst].retries = retries
            self.metrics.bump("discovery_retries", now, self.node_id)
        return "retry"

    def _designate(self) -> NodeId | None:
        """Pick the single neighbor allowed to rebroadcast (cnb only)."""
        if self.config.policy is not Policy.CNB:
            return None
        nearby = sorted(self.net.neighbors(self.node_id))
        if not nearby:
            return None
        return self.net.rng.choice(nearby)

    # -- forward ant ----------------------------------------------------------

    def on_pfant(self, p: PFant) -> Decision:
        if not _petal_ok(p.petal):
            self.metrics.bump("protocol_errors", self.net.now(), self.node_id)
            return Decision.DROP_MALFORMED
        key = (p.src, p.seq)
        if key in self.seen:
            return Decision.DROP_DUPLICATE
        self.seen.add(key)
        now = self.net.now()
        # First copy lays reverse pheromone toward the source, discounted
        # by the distance the ant has come.
        self.table.set_level(p.src, p.prev_hop,
                             self.config.initial_pheromone / (1 + p.hop_count),
                             now, self.config.min_pheromone)
        if self.node_id == p.dst:
            # The ant stops here; the reply retraces the hop it arrived on.
            reply = PBant(seq=p.seq, src=p.src, dst=self.node_id,
                          hops_from_dst=0, prev_hop=self.node_id)
            self.net.unicast(self.node_id, p.prev_hop, reply)
            return Decision.GENERATE_BANT
        if self.config.policy is Policy.PAR:
            if not contains(p.petal, self.net.position(self.node_id)):
                return Decision.DROP_OUTSIDE_PETAL
        elif self.config.policy is Policy.CNB:
            if p.designated != self.node_id:
                return Decision.DROP_NOT_DESIGNATED
        self.net.broadcast(self.node_id, replace(
            p, hop_count=p.hop_count + 1, prev_hop=self.node_id,
            designated=self._designate()))
        return Decision.REBROADCAST

    # -- backward ant ----------------------------------------------------------

    def on_pbant(self, b: PBant) -> Decision:
        now = self.net.now()
        self.table.deposit(b.dst, b.prev_hop,
                           self.config.initial_pheromone / (1 + b.hops_from_dst),
                           now, self.config.min_pheromone)
        if self.node_id == b.src:
            self.pending.pop(b.dst, None)  # timer finds no pending attempt
            self._flush_buffers(b.dst)
            return Decision.ACTIVATE_ROUTE
        back = select_next_hop(self.table, b.src)
        if back is None:
            self.metrics.bump("bant_orphans", now, self.node_id)
            return Decision.DROP_ORPHAN
        if b.hops_from_dst + 1 > self.config.max_hops:
            self.metrics.bump("pbant_ttl_drops", now, self.node_id)
            return Decision.DROP_TTL
        self.net.unicast(self.node_id, back,
                         replace(b, hops_from_dst=b.hops_from_dst + 1,
                                 prev_hop=self.node_id))
        return Decision.FORWARD

    # -- data ------------------------------------------------------------------

    def on_data(self, pkt: DataPacket, received_from: NodeId | None = None) -> Decision:
        now = self.net.now()
        if self.node_id == pkt.dst:
            self.metrics.data_delivered(pkt, now)
            return Decision.DELIVER
        if pkt.hops >= self.config.max_hops:
            self.metrics.data_dropped(pkt, "ttl", now, self.node_id)
            return Decision.DROP_TTL
        next_hop = select_next_hop(self.table, pkt.dst)
        if next_hop is not None:
            # Active-route upkeep: traffic keeps the used entry alive.
            self.table.deposit(pkt.dst, next_hop, self.config.data_reinforcement,
                               now, self.config.min_pheromone)
            self.net.unicast(self.node_id, next_hop, replace(pkt, hops=pkt.hops + 1))
            return Decision.FORWARD
        if self.node_id == pkt.src:
            self._buffer(pkt, now)
            self.start_discovery(pkt.dst, self.net.position(pkt.dst))
            return Decision.BUFFER
        self.metrics.data_dropped(pkt, "no_route", now, self.node_id)
        self._emit_route_error(pkt.dst, pkt.src, upstream=received_from)
        return Decision.EMIT_ERROR

    def _buffer(self, pkt: DataPacket, now: float) -> None:
        queue = self.buffers.setdefault(pkt.flow, deque())
        if len(queue) >= self.config.buffer_limit:
            oldest = queue.popleft()
            self.metrics.data_dropped(oldest, "buffer_overflow", now, self.node_id)
        queue.append(pkt)

    def _take_buffered(self, dst: NodeId) -> list[DataPacket]:
        """Remove and return all buffered packets for dst, oldest first."""
        taken = []
        for flow in sorted(self.buffers):
            queue = self.buffers[flow]
            kept = deque(p for p in queue if p.dst != dst)
            taken.extend(p for p in queue if p.dst == dst)
            if kept:
                self.buffers[flow] = kept
            else:
                del self.buffers[flow]
        taken.sort(key=lambda p: (p.created_at, p.flow, p.seq))
        return taken

    def _flush_buffers(self, dst: NodeId) -> None:
        for pkt in self._take_buffered(dst):
            self.on_data(pkt)

    def buffered_packets(self) -> list[DataPacket]:
        out = []
        for flow in sorted(self.buffers):
            out.extend(self.buffers[flow])
        return out

    # -- repair ------------------------------------------------------------------

    def on_link_break(self, dead_neighbor: NodeId, packet=None) -> Decision:
        """A unicast to dead_neighbor failed; fail over or report the loss.

        All table entries through the dead neighbor go first. The packet
        that was on the broken hop is retried over an alternative entry
        when one survives, otherwise a route error travels back to its
        source (or, when this node is the source, discovery restarts and
        the packet waits in the buffer).
        """
        self.table.prune_next_hop(dead_neighbor)
        if packet is None:
            return Decision.PRUNE_ONLY
        now = self.net.now()
        if isinstance(packet, DataPacket):
            alternative = select_next_hop(self.table, packet.dst)
            if alternative is not None:
                self.table.deposit(packet.dst, alternative,
                                   self.config.data_reinforcement, now,
                                   self.config.min_pheromone)
                self.net.unicast(self.node_id, alternative, packet)
                return Decision.REROUTE
            if self.node_id == packet.src:
                self._buffer(packet, now)
                self.start_discovery(packet.dst, self.net.position(packet.dst))
                return Decision.BUFFER
            self.metrics.data_dropped(packet, "no_route", now, self.node_id)
            self._emit_route_error(packet.dst, packet.src)
            return Decision.EMIT_ERROR
        if isinstance(packet, PBant):
            back = select_next_hop(self.table, packet.src)
            if back is not None:
                self.net.unicast(self.node_id, back, packet)
                return Decision.REROUTE
            self.metrics.bump("bant_orphans", now, self.node_id)
            return Decision.DROP_ORPHAN
        if isinstance(packet, RouteError):
            toward = select_next_hop(self.table, packet.origin_src)
            if toward is not None:
                self.net.unicast(self.node_id, toward, packet)
                return Decision.REROUTE
            self.metrics.bump("rerr_unroutable", now, self.node_id)
            return Decision.DROP_UNROUTABLE
        return Decision.PRUNE_ONLY

    def _emit_route_error(self, unreachable_dst: NodeId, origin_src: NodeId,
                          upstream: NodeId | None = None) -> None:
        """Send a route error toward the source of the stranded traffic.

        The reverse pheromone trail is preferred; when it has evaporated
        the error falls back to the neighbor the undeliverable packet
        arrived from, which walks it one hop closer to the source.
        """
        err = RouteError(unreachable_dst=unreachable_dst,
                         reporter=self.node_id, origin_src=origin_src)
        toward = select_next_hop(self.table, origin_src)
        if toward is None:
            toward = upstream
        if toward is None:
            self.metrics.bump("rerr_unroutable", self.net.now(), self.node_id)
            return
        self.net.unicast(self.node_id, toward, err)

    def on_route_error(self, e: RouteError, received_from: NodeId) -> Decision:
        """Prune the reported destination along the reporting direction.

        Intermediate nodes pass the error on toward the originator; the
        originator starts a fresh discovery unless a newer attempt for
        that destination is already pending (stale errors are ignored).
        """
        now = self.net.now()
        self.table.remove(e.unreachable_dst, received_from)
        if self.node_id == e.origin_src:
            if e.unreachable_dst in self.pending:
                return Decision.IGNORE_STALE
            self.start_discovery(e.unreachable_dst, self.net.position(e.unreachable_dst))
            return Decision.REDISCOVER
        if e.hops + 1 > self.config.max_hops:
            self.metrics.bump("rerr_ttl_drops", now, self.node_id)
            return Decision.DROP_TTL
        toward = select_next_hop(self.table, e.origin_src)
        if toward is None:
            self.metrics.bump("rerr_unroutable", now, self.node_id)
            return Decision.DROP_UNROUTABLE
        self.net.unicast(self.node_id, toward, replace(e, hops=e.hops + 1))
        return Decision.FORWARD

    # -- maintenance ----------------------------------------------------------------

    def evaporate(self, now: float) -> None:
        """One decay tick; called every evaporation_tick seconds."""
        self.table.evaporate(self.config.evaporation_rate, self.config.min_pheromone)
