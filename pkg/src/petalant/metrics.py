"""Run metrics: per-packet counters, the evaluation report, and CSV I/O.

A single MetricsCollector instance observes one run. Everything in the
final report is derived from the same accounting events that go into the
trace file, so a report can be recomputed offline from a trace and must
come out identical.

Overhead is defined as control transmissions (route requests, replies
and errors) per delivered data packet.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

TRACE_COLUMNS = ("time", "node", "kind", "packet", "pid", "src", "dst", "hops", "value", "note")

SUMMARY_COLUMNS = (
    "scenario",
    "protocol",
    "seed",
    "packets_sent",
    "packets_received",
    "pdf",
    "avg_delay_ms",
    "throughput_kbps",
    "overhead",
    "energy_j",
    "control_tx",
    "pfant_tx",
    "pbant_tx",
    "rerr_tx",
    "data_tx",
    "dropped",
    "buffered_end",
    "discoveries",
    "discovery_failures",
    "flags",
    "flows",
)

OVERHEAD_NOTE = (
    "overhead = control transmissions (route requests, replies, errors)"
    " per delivered data packet"
)

CONTROL_KINDS = ("pfant", "pbant", "rerr")


def compute_pdf(sent: int, received: int) -> float:
    """Packet delivery fraction in percent; 100 by convention when nothing was sent."""
    if sent < 0:
        raise ValueError("sent must be >= 0")
    if sent == 0:
        return 100.0
    return 100.0 * received / sent


def compute_delay(delays_ms) -> float:
    """Mean end-to-end delay over delivered packets, 0 when none delivered."""
    delays_ms = list(delays_ms)
    if not delays_ms:
        return 0.0
    return sum(delays_ms) / len(delays_ms)


def compute_overhead(control_tx_count: int, packets_received: int) -> float:
    """Control transmissions per delivered data packet.

    With zero deliveries the raw control count is reported instead of a
    division by zero; callers flag such reports as degenerate.
    """
    if packets_received == 0:
        return float(control_tx_count)
    return control_tx_count / packets_received


def compute_throughput(received: int, packet_size: int, sim_time: float) -> float:
    """Delivered payload rate in kilobits per second."""
    if sim_time <= 0:
        raise ValueError("sim_time must be positive")
    return received * packet_size * 8 / (sim_time * 1000.0)


@dataclass(frozen=True)
class FlowStats:
    flow: int
    src: int
    dst: int
    sent: int
    delivered: int
    dropped: int
    avg_delay_ms: float


@dataclass(frozen=True)
class MetricsReport:
    scenario: str
    protocol: str
    seed: int
    sim_time: float
    packet_size: int
    packets_sent: int
    packets_received: int
    pdf: float
    avg_delay_ms: float
    throughput_kbps: float
    overhead: float
    energy_j: float
    control_tx_count: int
    counters: tuple  # sorted (name, value) pairs
    per_flow: tuple  # FlowStats per flow id
    flags: tuple  # sorted degenerate-condition markers

    def counter(self, name: str) -> int:
        return dict(self.counters).get(name, 0)

    def dropped_total(self) -> int:
        return sum(v for k, v in self.counters if k.startswith("drop_"))

    def conserves_packets(self) -> bool:
        """sent = delivered + dropped + still buffered (in-flight drained into dropped)."""
        return self.packets_sent == (
            self.packets_received + self.dropped_total() + self.counter("data_buffered_end")
        )


class _FlowTally:
    __slots__ = ("src", "dst", "sent", "delivered", "dropped", "delay_sum")

    def __init__(self, src, dst):
        self.src = src
        self.dst = dst
        self.sent = 0
        self.delivered = 0
        self.dropped = 0
        self.delay_sum = 0.0


class MetricsCollector:
    """Accumulates accounting events for one run and renders the report.

    When tracing is enabled every accounting event also appends one trace
    row, and `decision`/`note` add informational rows that do not affect
    the report.
    """

    def __init__(self, scenario, protocol, seed, sim_time, packet_size, trace=False):
        self.scenario = scenario
        self.protocol = protocol
        self.seed = seed
        self.sim_time = sim_time
        self.packet_size = packet_size
        self.rows = [] if trace else None
        self.counters: dict[str, int] = {}
        self.flows: dict[int, _FlowTally] = {}
        self.flags: set[str] = set()
        self.energy_total = 0.0

    # -- internals ---------------------------------------------------------

    def _bump(self, name, amount=1):
        self.counters[name] = self.counters.get(name, 0) + amount

    def _row(self, time, node, kind, packet="", pid="", src="", dst="", hops="", value="", note=""):
        if self.rows is not None:
            self.rows.append((time, node, kind, packet, pid, src, dst, hops, value, note))

    def _flow(self, pkt):
        tally = self.flows.get(pkt.flow)
        if tally is None:
            tally = self.flows[pkt.flow] = _FlowTally(pkt.src, pkt.dst)
        return tally

    # -- accounting events (always drive the report) ------------------------

    def flow_emit(self, pkt, now):
        self._bump("data_sent")
        self._flow(pkt).sent += 1
        self._row(now, pkt.src, "flow_emit", "data", f"{pkt.flow}:{pkt.seq}",
                  pkt.src, pkt.dst, 0, repr(pkt.created_at))

    def data_delivered(self, pkt, now):
        self._bump("data_delivered")
        tally = self._flow(pkt)
        tally.delivered += 1
        tally.delay_sum += (now - pkt.created_at) * 1000.0
        self._row(now, pkt.dst, "deliver", "data", f"{pkt.flow}:{pkt.seq}",
                  pkt.src, pkt.dst, pkt.hops, repr(pkt.created_at))

    def data_dropped(self, pkt, reason, now, node=-1):
        self._bump(f"drop_{reason}")
        self._flow(pkt).dropped += 1
        self._row(now, node, "drop", "data", f"{pkt.flow}:{pkt.seq}",
                  pkt.src, pkt.dst, pkt.hops, "", reason)

    def data_still_buffered(self, pkt, now, node=-1):
        self._bump("data_buffered_end")
        self._row(now, node, "still_buffered", "data", f"{pkt.flow}:{pkt.seq}",
                  pkt.src, pkt.dst, pkt.hops, "")

    def transmit(self, node, packet_kind, pid, src, dst, hops, mode, now):
        self._bump(f"{packet_kind}_tx")
        self._row(now, node, "transmit", packet_kind, pid, src, dst, hops, "", mode)

    def bump(self, name, now, node=-1):
        """Named protocol counter (orphaned replies, discovery retries, ...)."""
        self._bump(name)
        self._row(now, node, "count", note=name)

    def energy_sample(self, node, tx_dur, rx_dur, idle_dur, joules, now):
        self.energy_total += joules
        self._row(now, node, "energy", value=repr(joules),
                  note=f"tx={tx_dur!r};rx={rx_dur!r};idle={idle_dur!r}")

    # -- informational rows (trace only) ------------------------------------

    def decision(self, now, node, packet_kind, pid, outcome):
        self._row(now, node, "decision", packet_kind, pid, note=outcome)

    def note(self, now, node, kind, value="", note=""):
        self._row(now, node, kind, value=value, note=note)

    # -- report --------------------------------------------------------------

    def report(self) -> MetricsReport:
        sent = self.counters.get("data_sent", 0)
        delivered = self.counters.get("data_delivered", 0)
        control = sum(self.counters.get(f"{k}_tx", 0) for k in CONTROL_KINDS)
        delay_sum = sum(t.delay_sum for t in self.flows.values())
        avg_delay = delay_sum / delivered if delivered else 0.0
        if delivered == 0:
            self.flags.add("no_deliveries")
            if control:
                self.flags.add("overhead_degenerate")
        per_flow = tuple(
            FlowStats(fid, t.src, t.dst, t.sent, t.delivered, t.dropped,
                      t.delay_sum / t.delivered if t.delivered else 0.0)
            for fid, t in sorted(self.flows.items())
        )
        return MetricsReport(
            scenario=self.scenario,
            protocol=self.protocol,
            seed=self.seed,
            sim_time=self.sim_time,
            packet_size=self.packet_size,
            packets_sent=sent,
            packets_received=delivered,
            pdf=compute_pdf(sent, delivered),
            avg_delay_ms=avg_delay,
            throughput_kbps=compute_throughput(delivered, self.packet_size, self.sim_time),
            overhead=compute_overhead(control, delivered),
            energy_j=self.energy_total,
            control_tx_count=control,
            counters=tuple(sorted(self.counters.items())),
            per_flow=per_flow,
            flags=tuple(sorted(self.flags)),
        )


# -- trace files -------------------------------------------------------------


class _PacketView:
    """Packet fields reconstructed from a trace row, for replay."""

    __slots__ = ("flow", "seq", "src", "dst", "created_at", "hops")

    def __init__(self, pid, src, dst, created_at, hops):
        flow, seq = pid.split(":")
        self.flow = int(flow)
        self.seq = int(seq)
        self.src = int(src)
        self.dst = int(dst)
        self.created_at = created_at
        self.hops = int(hops) if hops != "" else 0


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trace(path, rows, header) -> None:
    """Header is (key, value) pairs (or a dict); keys may repeat."""
    pairs = header.items() if isinstance(header, dict) else header
    path = Path(path)
    with path.open("w", newline="") as fh:
        for key, value in pairs:
            fh.write(f"# {key} = {value}\n")
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_trace(path):
    """Returns (header dict, list of raw string rows)."""
    header: dict[str, str] = {}
    rows = []
    with Path(path).open(newline="") as fh:
        pending = []
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                header[key.strip()] = value.strip()
            else:
                pending.append(line)
        for record in csv.reader(pending):
            rows.append(tuple(record))
    return header, rows[1:]  # skip the column header row


def replay_report(rows, scenario, protocol, seed, sim_time, packet_size) -> MetricsReport:
    """Recompute a MetricsReport from trace rows alone."""
    collector = MetricsCollector(scenario, protocol, seed, sim_time, packet_size, trace=False)
    for time, node, kind, packet, pid, src, dst, hops, value, note in rows:
        now = float(time)
        node = int(node)
        if kind == "flow_emit":
            collector.flow_emit(_PacketView(pid, src, dst, float(value), hops), now)
        elif kind == "deliver":
            collector.data_delivered(_PacketView(pid, src, dst, float(value), hops), now)
        elif kind == "drop":
            collector.data_dropped(_PacketView(pid, src, dst, 0.0, hops), note, now, node)
        elif kind == "still_buffered":
            collector.data_still_buffered(_PacketView(pid, src, dst, 0.0, hops), now, node)
        elif kind == "transmit":
            collector.transmit(node, packet, pid, src, dst, hops, note, now)
        elif kind == "count":
            collector.bump(note, now, node)
        elif kind == "energy":
            durations = dict(part.split("=") for part in note.split(";"))
            collector.energy_sample(node, float(durations["tx"]), float(durations["rx"]),
                                    float(durations["idle"]), float(value), now)
        # decision/waypoint/evaporation/timeout rows are informational
    return collector.report()


def replay_report_file(path) -> MetricsReport:
    """Recompute a report from a trace file written by write_trace."""
    header, rows = read_trace(path)
    return replay_report(
        rows,
        scenario=header["scenario"],
        protocol=header["protocol"],
        seed=int(header["seed"]),
        sim_time=float(header["sim_time"]),
        packet_size=int(header["packet_size"]),
    )


# -- summary files ------------------------------------------------------------


def summary_row(report: MetricsReport) -> dict:
    return {
        "scenario": report.scenario,
        "protocol": report.protocol,
        "seed": report.seed,
        "packets_sent": report.packets_sent,
        "packets_received": report.packets_received,
        "pdf": report.pdf,
        "avg_delay_ms": report.avg_delay_ms,
        "throughput_kbps": report.throughput_kbps,
        "overhead": report.overhead,
        "energy_j": report.energy_j,
        "control_tx": report.control_tx_count,
        "pfant_tx": report.counter("pfant_tx"),
        "pbant_tx": report.counter("pbant_tx"),
        "rerr_tx": report.counter("rerr_tx"),
        "data_tx": report.counter("data_tx"),
        "dropped": report.dropped_total(),
        "buffered_end": report.counter("data_buffered_end"),
        "discoveries": report.counter("discoveries_started"),
        "discovery_failures": report.counter("discoveries_failed"),
        "flags": ";".join(report.flags),
        "flows": ";".join(
            f"{f.flow}({f.src}>{f.dst}):{f.sent}/{f.delivered}/{f.dropped}/{f.avg_delay_ms:.3f}"
            for f in report.per_flow
        ),
    }


_AVG_SKIP = ("scenario", "protocol", "seed", "flags", "flows")


def average_row(rows: list[dict]) -> dict:
    """Mean across seeds of one protocol, mirroring an AVG table row."""
    out = dict(rows[0])
    out["seed"] = "AVG"
    out["flags"] = ""
    out["flows"] = ""
    for column in SUMMARY_COLUMNS:
        if column in _AVG_SKIP:
            continue
        out[column] = sum(r[column] for r in rows) / len(rows)
    return out


def write_summary(path, reports, header_lines=()) -> None:
    """One CSV row per run, sorted by (protocol, seed), plus per-protocol AVG rows."""
    rows = sorted((summary_row(r) for r in reports),
                  key=lambda r: (r["protocol"], r["seed"]))
    path = Path(path)
    with path.open("w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# {OVERHEAD_NOTE}\n")
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        by_protocol: dict[str, list[dict]] = {}
        for row in rows:
            by_protocol.setdefault(row["protocol"], []).append(row)
        for protocol in sorted(by_protocol):
            group = by_protocol[protocol]
            for row in group:
                writer.writerow({k: _fmt(v) for k, v in row.items()})
            writer.writerow({k: _fmt(v) for k, v in average_row(group).items()})


def read_summary(path):
    """Returns (comment header lines, list of row dicts with numeric fields parsed)."""
    comments = []
    data_lines = []
    with Path(path).open(newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line[1:].strip())
            else:
                data_lines.append(line)
    rows = []
    for record in csv.DictReader(data_lines):
        parsed = dict(record)
        for key in SUMMARY_COLUMNS:
            if key in ("scenario", "protocol", "seed", "flags", "flows"):
                continue
            parsed[key] = float(record[key])
        rows.append(parsed)
    return comments, rows
