"""Metric formula tests and trace/report round-trip checks."""

import pytest

from petalant.engine import run
from petalant.metrics import (
    compute_delay,
    compute_overhead,
    compute_pdf,
    compute_throughput,
    read_summary,
    read_trace,
    replay_report,
    replay_report_file,
    write_summary,
    write_trace,
)
from petalant.scenario import load_scenario, resolve_scenario


class TestPdf:
    def test_reported_average_case(self):
        # 6008 sent / 5998.6 received is the published PAR average row
        assert round(compute_pdf(6008, 5998.6), 2) == 99.84

    def test_full_delivery(self):
        assert compute_pdf(100, 100) == 100.0

    def test_nothing_sent_is_vacuously_full(self):
        assert compute_pdf(0, 0) == 100.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            compute_pdf(-1, 0)


class TestDelay:
    def test_mean(self):
        assert compute_delay([10.0, 20.0, 30.0]) == 20.0

    def test_single(self):
        assert compute_delay([5.0]) == 5.0

    def test_empty(self):
        assert compute_delay([]) == 0.0


class TestOverhead:
    def test_typical_ratio(self):
        assert compute_overhead(300, 6000) == pytest.approx(0.05)

    def test_no_control(self):
        assert compute_overhead(0, 4000) == 0.0

    def test_degenerate_no_deliveries(self):
        assert compute_overhead(100, 0) == 100.0


class TestThroughput:
    def test_typical(self):
        assert compute_throughput(6000, 512, 160.0) == pytest.approx(153.6)

    def test_zero_packets(self):
        assert compute_throughput(0, 512, 160.0) == 0.0

    def test_small(self):
        assert compute_throughput(1, 1000, 1.0) == pytest.approx(8.0)

    def test_bad_sim_time(self):
        with pytest.raises(ValueError):
            compute_throughput(1, 512, 0.0)


def short_env_a(policy="par", seed=1, sim_time=20.0):
    scn = load_scenario(resolve_scenario("env_a"))
    scn.sim_time = sim_time
    scn.rng_seed = seed
    from petalant.routing import Policy

    scn.protocol.policy = Policy(policy)
    return scn


class TestReplay:
    def test_report_recomputable_from_rows(self):
        scn = short_env_a()
        result = run(scn, trace=True)
        rebuilt = replay_report(result.trace, scenario=scn.name, protocol="par",
                                seed=1, sim_time=20.0, packet_size=512)
        assert rebuilt == result.report

    def test_report_recomputable_from_file(self, tmp_path):
        scn = short_env_a(policy="flood")
        result = run(scn, trace=True)
        path = tmp_path / "trace.csv"
        header = {
            "scenario": scn.name,
            "protocol": "flood",
            "seed": 1,
            "sim_time": scn.sim_time,
            "packet_size": scn.packet_size,
        }
        write_trace(path, result.trace, header)
        assert replay_report_file(path) == result.report

    def test_trace_round_trips_through_csv(self, tmp_path):
        scn = short_env_a(sim_time=10.0)
        result = run(scn, trace=True)
        path = tmp_path / "trace.csv"
        write_trace(path, result.trace, {"scenario": "x", "protocol": "par",
                                         "seed": 1, "sim_time": 10.0,
                                         "packet_size": 512})
        _, rows = read_trace(path)
        assert len(rows) == len(result.trace)


class TestConservation:
    @pytest.mark.parametrize("policy", ["par", "cnb", "flood"])
    def test_end_of_run_identity(self, policy):
        report = run(short_env_a(policy=policy)).report
        assert report.conserves_packets()
        assert report.packets_received <= report.packets_sent


class TestSummaryFile:
    def test_rows_sorted_with_avg(self, tmp_path):
        reports = []
        for seed in (2, 1):
            for policy in ("flood", "par"):
                scn = short_env_a(policy=policy, seed=seed, sim_time=8.0)
                reports.append(run(scn).report)
        path = tmp_path / "summary.csv"
        write_summary(path, reports, header_lines=["width_ratio = 0.5"])
        comments, rows = read_summary(path)
        assert any("width_ratio" in c for c in comments)
        assert any("overhead =" in c for c in comments)
        labels = [(r["protocol"], r["seed"]) for r in rows]
        assert labels == [("flood", "1"), ("flood", "2"), ("flood", "AVG"),
                          ("par", "1"), ("par", "2"), ("par", "AVG")]
        flood_rows = [r for r in rows if r["protocol"] == "flood" and r["seed"] != "AVG"]
        avg = next(r for r in rows if r["protocol"] == "flood" and r["seed"] == "AVG")
        assert avg["pdf"] == pytest.approx(sum(r["pdf"] for r in flood_rows) / 2)
