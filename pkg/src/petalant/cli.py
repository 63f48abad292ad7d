"""Command-line front end.

Subcommands:

* ``run``      - run (protocol x seed) sweeps over a scenario file, write
  a summary CSV with per-protocol AVG rows and optional per-run traces.
* ``validate`` - check a scenario file without running any events.
* ``report``   - render comparison figures next to a summary CSV.

Re-running an identical run specification overwrites its outputs with
byte-identical content.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .engine import run as run_simulation
from .metrics import write_summary, write_trace
from .scenario import (
    Scenario,
    ScenarioError,
    apply_overrides,
    load_scenario,
    resolve_scenario,
)

DEFAULT_REPLICATIONS = 15


@dataclass
class RunSpec:
    scenario: str
    protocols: list[str] = field(default_factory=lambda: ["par"])
    seeds: list[int] = field(default_factory=list)
    out_dir: str = "results"
    overrides: list[str] = field(default_factory=list)
    trace: bool = False


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    parsed = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ScenarioError([f"override must look like key=value, got {item!r}"])
        parsed[key.strip()] = value.strip()
    return parsed


def _effective_scenario(spec: RunSpec) -> Scenario:
    path = resolve_scenario(spec.scenario)
    scenario = load_scenario(path)
    apply_overrides(scenario, _parse_overrides(spec.overrides))
    problems = scenario.validate()
    if problems:
        raise ScenarioError(problems)
    return scenario


def _header_lines(spec: RunSpec, scenario: Scenario) -> list[str]:
    lines = [f"scenario_file = {spec.scenario}"]
    lines.extend(f"override: {item}" for item in spec.overrides)
    lines.extend(f"{key} = {value}" for key, value in scenario.key_values()
                 if key not in ("protocol", "rng_seed"))
    lines.append("protocols = " + ",".join(spec.protocols))
    lines.append("seeds = " + ",".join(str(s) for s in spec.seeds))
    return lines


def run_experiment(spec: RunSpec) -> int:
    """Run every (protocol, seed) pair and write summary (and traces)."""
    try:
        scenario = _effective_scenario(spec)
    except ScenarioError as err:
        for diagnostic in err.diagnostics:
            print(f"error: {diagnostic}", file=sys.stderr)
        return 2
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    reports = []
    for protocol in spec.protocols:
        for seed in spec.seeds:
            variant = scenario.clone()
            apply_overrides(variant, {"protocol": protocol, "rng_seed": str(seed)})
            result = run_simulation(variant, trace=spec.trace)
            report = result.report
            reports.append(report)
            if spec.trace:
                trace_path = out_dir / f"trace_{scenario.name}_{protocol}_{seed}.csv"
                header = [("scenario", scenario.name), ("seed", seed),
                          *variant.key_values()]
                write_trace(trace_path, result.trace, header)
            print(f"done {scenario.name} protocol={protocol} seed={seed} "
                  f"pdf={report.pdf:.2f} delay={report.avg_delay_ms:.3f}ms "
                  f"overhead={report.overhead:.4f}")
    write_summary(out_dir / "summary.csv", reports, _header_lines(spec, scenario))
    return 0


def validate_scenario(path_or_name: str) -> list[str]:
    """Full field/type/range check; never runs events."""
    try:
        scenario = load_scenario(resolve_scenario(path_or_name))
    except ScenarioError as err:
        return err.diagnostics
    return scenario.validate()


def _cmd_run(args) -> int:
    if args.seed and args.reps is not None:
        print("error: give either --seed or --reps, not both", file=sys.stderr)
        return 2
    seeds = list(args.seed)
    if not seeds:
        reps = DEFAULT_REPLICATIONS if args.reps is None else args.reps
        if reps < 1:
            print("error: --reps must be >= 1", file=sys.stderr)
            return 2
        seeds = list(range(args.base_seed, args.base_seed + reps))
    spec = RunSpec(
        scenario=args.scenario,
        protocols=args.protocol or ["par"],
        seeds=seeds,
        out_dir=args.out,
        overrides=args.set or [],
        trace=args.trace,
    )
    return run_experiment(spec)


def _cmd_validate(args) -> int:
    problems = validate_scenario(args.scenario)
    if problems:
        for diagnostic in problems:
            print(f"error: {diagnostic}", file=sys.stderr)
        return 2
    print(f"{args.scenario}: ok")
    return 0


def _cmd_report(args) -> int:
    from .figures import render_figures

    try:
        written = render_figures(args.summary, args.out)
    except (OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="petalant",
        description="Deterministic MANET simulator comparing petal-restricted "
                    "ant routing against controlled-neighbor and blind-flood "
                    "baselines.")
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run a (protocol x seed) sweep")
    runp.add_argument("--scenario", required=True,
                      help="scenario file path, or a bundled name (env_a, env_b)")
    runp.add_argument("--protocol", action="append", choices=["par", "cnb", "flood"],
                      help="protocol to run; repeatable (default: par)")
    runp.add_argument("--seed", action="append", type=int, default=[],
                      help="explicit seed; repeatable")
    runp.add_argument("--reps", type=int, default=None,
                      help=f"replication count from --base-seed "
                           f"(default {DEFAULT_REPLICATIONS} when no --seed)")
    runp.add_argument("--base-seed", type=int, default=1)
    runp.add_argument("--out", default="results", help="output directory")
    runp.add_argument("--set", action="append", metavar="KEY=VALUE",
                      help="override a scenario key; repeatable")
    runp.add_argument("--trace", action="store_true",
                      help="write one event-trace CSV per run")
    runp.set_defaults(handler=_cmd_run)

    valp = sub.add_parser("validate", help="check a scenario file")
    valp.add_argument("--scenario", required=True)
    valp.set_defaults(handler=_cmd_validate)

    repp = sub.add_parser("report", help="render figures from a summary CSV")
    repp.add_argument("--summary", required=True, help="summary.csv from a run")
    repp.add_argument("--out", default=None,
                      help="figure directory (default: beside the summary)")
    repp.set_defaults(handler=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
