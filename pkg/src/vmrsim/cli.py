"""Command-line front end: run simulations, sweep experiment matrices,
compare reports, and answer one-shot slot-demand questions.

Exit codes are stable for scripting: 0 on success, 1 for usage errors
(bad flags, malformed or incomparable inputs), 2 for run failures
(a simulation or an output write blew up, or a sweep had failed cells).
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import re
import sys
from dataclasses import fields

from .cluster import ClusterConfig
from .engine import SimulationParams, run_simulation
from .errors import (
    ComparisonError,
    ConfigError,
    ContractViolation,
    ParseError,
    SimulationError,
    UsageError,
)
from .estimator import JobTimingModel, estimate_completion_time, min_slots
from .metrics import (
    REPORT_FORMATS,
    RunRequest,
    SimReport,
    build_report,
    compare,
    emit_report,
    load_jobs,
    run_experiment,
    write_trace_log,
)
from .workload import PRESETS, load_profiles

_FORMAT_EXTENSIONS = {"json-lines": ".jsonl", "csv": ".csv", "table": ".txt"}
_USAGE_ERRORS = (UsageError, ConfigError, ParseError, ComparisonError)


# ------------------------------------------------------------ input loading


def load_cluster_config(path) -> ClusterConfig:
    """Read cluster shape overrides from an INI file's [cluster] section.

    Keys are ``ClusterConfig`` field names; values are coerced to the
    field's numeric type. Unknown sections or keys are rejected so typos
    fail loudly instead of silently running the default cluster.
    """
    parser = configparser.ConfigParser()
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ParseError(f"config file {path}: {exc}") from None
    if not read:
        raise ParseError(f"cannot read config file {path}")
    sections = parser.sections()
    if sections != ["cluster"]:
        raise ParseError(
            f"config file {path} must contain exactly one [cluster] section, "
            f"found {sections or 'none'}"
        )
    coerce = {f.name: type(f.default) for f in fields(ClusterConfig)}
    kwargs = {}
    for key, raw in parser.items("cluster"):
        if key not in coerce:
            known = ", ".join(sorted(coerce))
            raise ParseError(f"unknown cluster setting {key!r} (known: {known})")
        try:
            kwargs[key] = coerce[key](raw)
        except ValueError:
            raise ParseError(
                f"cluster setting {key} = {raw!r} is not a valid "
                f"{coerce[key].__name__}"
            ) from None
    return ClusterConfig(**kwargs).validate()


def _read_text(path, what: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc}") from None


def _load_report(path) -> SimReport:
    text = _read_text(path, "report")
    try:
        return SimReport.from_json_lines(text)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


def _matrix_requests(obj) -> list[RunRequest]:
    """Turn a parsed matrix file into run requests.

    Accepted shapes: a list of cell objects; an object with a "cells"
    list; or an object with "schedulers", "workloads", and "seeds" lists
    that is expanded to their cross product (optional top-level "jitter"
    and "shuffle_mode" apply to every cell).
    """
    if isinstance(obj, dict) and "cells" in obj:
        cells = obj["cells"]
    elif isinstance(obj, list):
        cells = obj
    elif isinstance(obj, dict):
        missing = [k for k in ("schedulers", "workloads", "seeds") if k not in obj]
        if missing:
            raise ParseError(
                "matrix object needs 'cells' or all of schedulers/workloads/"
                f"seeds (missing {', '.join(missing)})"
            )
        extra = set(obj) - {"schedulers", "workloads", "seeds", "jitter",
                            "shuffle_mode"}
        if extra:
            raise ParseError(f"unknown matrix keys: {', '.join(sorted(extra))}")
        cells = [
            {
                "scheduler": scheduler,
                "workload": workload,
                "seed": seed,
                "jitter": obj.get("jitter"),
                "shuffle_mode": obj.get("shuffle_mode"),
            }
            for scheduler in obj["schedulers"]
            for workload in obj["workloads"]
            for seed in obj["seeds"]
        ]
    else:
        raise ParseError("matrix must be a JSON list or object")
    if not isinstance(cells, list):
        raise ParseError("matrix cells must be a list")
    requests = []
    for index, cell in enumerate(cells):
        if not isinstance(cell, dict):
            raise ParseError(f"matrix cell {index} must be an object")
        extra = set(cell) - {"scheduler", "workload", "seed", "jitter",
                             "shuffle_mode"}
        if extra:
            raise ParseError(
                f"matrix cell {index} has unknown keys: {', '.join(sorted(extra))}"
            )
        missing = [k for k in ("scheduler", "workload", "seed") if k not in cell]
        if missing:
            raise ParseError(
                f"matrix cell {index} is missing {', '.join(missing)}"
            )
        requests.append(
            RunRequest(
                scheduler=cell["scheduler"],
                workload=cell["workload"],
                seed=cell["seed"],
                jitter=cell.get("jitter"),
                shuffle_mode=cell.get("shuffle_mode"),
            )
        )
    return requests


def load_matrix(path) -> list[RunRequest]:
    """Read an experiment matrix from a JSON file."""
    text = _read_text(path, "matrix file")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"matrix file {path}: {exc}") from None
    requests = _matrix_requests(obj)
    if not requests:
        raise UsageError(f"matrix file {path} describes no runs")
    return requests


# ----------------------------------------------------------- output helpers


def _workload_tag(workload: str) -> str:
    """A filesystem-safe short name for a preset or workload file."""
    if workload in PRESETS:
        name = workload
    else:
        name = os.path.splitext(os.path.basename(workload))[0] or "workload"
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", name)


def _unique_stem(base: str, used: set[str]) -> str:
    stem = base
    serial = 1
    while stem in used:
        serial += 1
        stem = f"{base}-{serial}"
    used.add(stem)
    return stem


def _write_report(report: SimReport, fmt: str, out_dir: str, stem: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, stem + _FORMAT_EXTENSIONS[fmt])
    emit_report(report, fmt, path)
    return path


def _summary_line(report: SimReport) -> str:
    agg = report.aggregates
    return (
        f"{report.scheduler} seed={report.seed}: {agg.job_count} jobs, "
        f"makespan {agg.makespan:.1f}s, throughput {agg.throughput:.6f} jobs/s, "
        f"locality {agg.map_locality_rate:.4f}, misses {agg.deadline_misses}"
    )


# ------------------------------------------------------------- subcommands


def _cmd_run(args) -> int:
    if args.trace and not args.out:
        raise UsageError("--trace needs --out to know where to write the log")
    config = load_cluster_config(args.config) if args.config else None
    profiles = load_profiles(args.profiles) if args.profiles else None
    jobs = load_jobs(args.workload, args.seed, config)
    overrides = {}
    if args.jitter is not None:
        overrides["jitter"] = args.jitter
    if args.shuffle_model is not None:
        overrides["shuffle_mode"] = args.shuffle_model
    params = SimulationParams(
        scheduler=args.scheduler,
        seed=args.seed,
        keep_trace=bool(args.trace),
        **overrides,
    )
    result = run_simulation(jobs, config=config, params=params,
                            profiles=profiles)
    report = build_report(result)
    fmt = args.format or ("json-lines" if args.out else "table")
    if args.out:
        stem = f"{args.scheduler}-{_workload_tag(args.workload)}-{args.seed}"
        path = _write_report(report, fmt, args.out, stem)
        print(f"report: {path}")
        if args.trace:
            trace_path = os.path.join(args.out, stem + ".trace")
            write_trace_log(result.trace_rows, trace_path)
            print(f"trace: {trace_path}")
        print(_summary_line(report))
    else:
        renderers = {
            "json-lines": report.to_json_lines,
            "csv": report.to_csv,
            "table": report.to_table,
        }
        sys.stdout.write(renderers[fmt]())
    return 0


def _cmd_sweep(args) -> int:
    config = load_cluster_config(args.config) if args.config else None
    matrix = load_matrix(args.matrix)
    outcomes = run_experiment(matrix, parallelism=args.parallel, config=config)
    used_stems: set[str] = set()
    failures = 0
    print(f"{'scheduler':<10}{'workload':<24}{'seed':>6}  {'status':<7}"
          f"{'makespan':>10}{'throughput':>12}  detail")
    for outcome in outcomes:
        request = outcome.request
        base = (f"{request.scheduler}-{_workload_tag(request.workload)}"
                f"-{request.seed}")
        workload_tag = _workload_tag(request.workload)
        if outcome.report is not None:
            stem = _unique_stem(base, used_stems)
            path = _write_report(outcome.report, args.format, args.out, stem)
            agg = outcome.report.aggregates
            print(f"{request.scheduler:<10}{workload_tag:<24}"
                  f"{request.seed:>6}  {'ok':<7}{agg.makespan:>10.1f}"
                  f"{agg.throughput:>12.6f}  {path}")
        else:
            failures += 1
            print(f"{request.scheduler:<10}{workload_tag:<24}"
                  f"{request.seed:>6}  {'error':<7}{'-':>10}{'-':>12}  "
                  f"{outcome.error}")
    print(f"{len(outcomes) - failures} of {len(outcomes)} runs succeeded")
    return 2 if failures else 0


def _cmd_compare(args) -> int:
    report_a = _load_report(args.report_a)
    report_b = _load_report(args.report_b)
    comparison = compare(report_a, report_b)
    sys.stdout.write(comparison.to_json() if args.json else comparison.to_text())
    return 0


def _cmd_estimate(args) -> int:
    try:
        model = JobTimingModel(
            map_task_count=args.map_tasks,
            reduce_task_count=args.reduce_tasks,
            mean_map_time=args.map_time,
            shuffle_copy_time=args.shuffle_time,
            mean_reduce_time=args.reduce_time,
        )
        demand = min_slots(model, args.deadline)
    except ContractViolation as exc:
        raise UsageError(str(exc)) from None
    estimate = estimate_completion_time(model, demand)
    print(f"map_tasks: {model.map_task_count}")
    print(f"reduce_tasks: {model.reduce_task_count}")
    print(f"shuffle_duration: {model.shuffle_duration:.4f}")
    print(f"slot_budget: {args.deadline - model.shuffle_duration:.4f}")
    print(f"feasible: {'yes' if demand.feasible else 'no'}")
    print(f"continuous_map: {demand.continuous_map:.4f}")
    print(f"continuous_reduce: {demand.continuous_reduce:.4f}")
    print(f"map_slots: {demand.map_slots}")
    print(f"reduce_slots: {demand.reduce_slots}")
    print(f"estimated_completion: {estimate:.4f}")
    print(f"deadline: {args.deadline:.4f}")
    return 0


# ---------------------------------------------------------------- plumbing


class _Parser(argparse.ArgumentParser):
    """Argument parser whose failures become UsageError (exit code 1)."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="vmrsim",
        description=(
            "Deterministic simulator for deadline-driven MapReduce "
            "scheduling on virtualized clusters."
        ),
    )
    commands = parser.add_subparsers(dest="command", metavar="command")

    run = commands.add_parser(
        "run", help="run one simulation and emit its report",
        description="Run one scheduler over one workload and emit a report.",
    )
    run.add_argument("--workload", required=True,
                     help=f"preset ({', '.join(sorted(PRESETS))}) or "
                          "workload trace file")
    run.add_argument("--scheduler", required=True,
                     choices=("ct", "fair", "fifo"),
                     help="scheduling policy")
    run.add_argument("--seed", type=int, default=0,
                     help="deterministic run seed (default 0)")
    run.add_argument("--config", metavar="FILE",
                     help="INI file with a [cluster] section of overrides")
    run.add_argument("--profiles", metavar="FILE",
                     help="INI file overriding per-job-type constants")
    run.add_argument("--out", metavar="DIR",
                     help="directory for the report (default: print to stdout)")
    run.add_argument("--format", choices=REPORT_FORMATS,
                     help="report format (default: table on stdout, "
                          "json-lines with --out)")
    run.add_argument("--trace", action="store_true",
                     help="also write the full event trace (needs --out)")
    run.add_argument("--jitter", type=float,
                     help="task duration jitter fraction in [0, 1)")
    run.add_argument("--shuffle-model", choices=("serial", "parallel"),
                     help="shuffle timing model")
    run.set_defaults(handler=_cmd_run)

    sweep = commands.add_parser(
        "sweep", help="run a (scheduler x workload x seed) matrix",
        description="Run every cell of an experiment matrix described by a "
                    "JSON file; failed cells are reported, not fatal.",
    )
    sweep.add_argument("--matrix", required=True, metavar="FILE",
                       help="JSON matrix: a list of cells, an object with "
                            "'cells', or schedulers/workloads/seeds lists "
                            "expanded to their cross product")
    sweep.add_argument("--out", required=True, metavar="DIR",
                       help="directory that receives one report per cell")
    sweep.add_argument("--parallel", type=int, default=1, metavar="N",
                       help="worker processes (default 1)")
    sweep.add_argument("--config", metavar="FILE",
                       help="INI file with a [cluster] section of overrides")
    sweep.add_argument("--format", choices=REPORT_FORMATS,
                       default="json-lines",
                       help="per-cell report format (default json-lines)")
    sweep.set_defaults(handler=_cmd_sweep)

    cmp_parser = commands.add_parser(
        "compare", help="compare two reports (second is the baseline)",
        description="Print relative deltas of report A over baseline B.",
    )
    cmp_parser.add_argument("report_a", help="json-lines report file")
    cmp_parser.add_argument("report_b", help="baseline json-lines report file")
    cmp_parser.add_argument("--json", action="store_true",
                            help="emit the comparison as JSON")
    cmp_parser.set_defaults(handler=_cmd_compare)

    estimate = commands.add_parser(
        "estimate", help="minimum slots that still meet a deadline",
        description="One-shot slot-demand computation: smallest map/reduce "
                    "slot counts whose phase times fit the deadline.",
    )
    estimate.add_argument("--um", "--map-tasks", dest="map_tasks",
                          type=int, required=True, help="map task count")
    estimate.add_argument("--tm", "--map-time", dest="map_time",
                          type=float, required=True,
                          help="mean map task duration (s)")
    estimate.add_argument("--vr", "--reduce-tasks", dest="reduce_tasks",
                          type=int, default=0, help="reduce task count")
    estimate.add_argument("--tr", "--reduce-time", dest="reduce_time",
                          type=float, default=None,
                          help="mean reduce task duration (s, defaults to "
                               "the map time)")
    estimate.add_argument("--ts", "--shuffle-time", dest="shuffle_time",
                          type=float, default=0.0,
                          help="serialized copy time per (map, reduce) "
                               "pair (s)")
    estimate.add_argument("--deadline", type=float, required=True,
                          help="time budget from now (s)")
    estimate.set_defaults(handler=_cmd_estimate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "handler", None) is None:
            raise UsageError("vmrsim: a command is required (see vmrsim -h)")
        return args.handler(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SimulationError, OSError) as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
