"""Run reports, scheduler comparisons, trace files, and the replay auditor.

A report can be built two ways: directly from a finished simulation, or by
replaying the run's trace log with no access to simulator state.  The two
paths must agree bit-for-bit on every aggregate — ``check_replay`` enforces
that, which is what makes the trace a trustworthy audit artifact rather
than a best-effort log.

All emitters are deterministic: emitting the same report twice yields
identical bytes, and floats round-trip at full precision via ``repr``.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

from .cluster import ClusterConfig
from .engine import (
    TRACE_FILE_HEADER,
    SimResult,
    SimulationParams,
    TraceRow,
    run_simulation,
)
from .errors import ComparisonError, ConfigError, ParseError
from .workload import PRESETS, parse_trace, synth_workload

# ------------------------------------------------------------------ reports


@dataclass(frozen=True)
class JobReport:
    """Per-job outcome row; ``turnaround`` is completion minus submission."""

    job_id: str
    job_type: str
    input_bytes: int
    submit_time: float
    deadline: float
    absolute_deadline: float
    turnaround: float
    deadline_met: bool
    map_tasks: int
    reduce_tasks: int
    map_launches: int
    local_map_launches: int
    remote_map_launches: int
    fallback_map_launches: int
    reduce_launches: int
    deferred_count: int
    mean_defer_wait: float
    map_locality_rate: float


@dataclass(frozen=True)
class RunAggregates:
    """Whole-run metrics; every field is recomputable from the trace log."""

    job_count: int
    makespan: float
    throughput: float
    mean_completion: float
    deadline_misses: int
    map_launches: int
    local_map_launches: int
    remote_map_launches: int
    fallback_launches: int
    grant_launches: int
    map_locality_rate: float
    fallback_fraction: float
    reduce_launches: int
    deferred_tasks: int
    mean_defer_wait: float
    reverted_tasks: int
    core_moves: int
    elided_matches: int
    withdrawals: int
    heartbeats: int
    violation_count: int

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


JOB_CSV_COLUMNS = tuple(f.name for f in fields(JobReport))


@dataclass
class SimReport:
    """One run's full report: identity, per-job rows, and aggregates."""

    scheduler: str
    seed: str
    jitter: float
    shuffle_mode: str
    jobs: tuple[JobReport, ...]
    aggregates: RunAggregates
    meta: dict = field(default_factory=dict)

    # ---------------------------------------------------------- identity

    def workload_identity(self) -> tuple:
        """What must match for two reports to be comparable."""
        return tuple(
            (j.job_id, j.job_type, j.input_bytes, j.submit_time, j.deadline)
            for j in self.jobs
        )

    def mean_completion_by_type(self) -> dict[str, float]:
        groups: dict[str, list[float]] = {}
        for row in self.jobs:  # rows are already sorted by job_id
            groups.setdefault(row.job_type, []).append(row.turnaround)
        return {t: sum(v) / len(v) for t, v in sorted(groups.items())}

    # --------------------------------------------------------- emission

    def to_json_lines(self) -> str:
        head = {
            "record": "run",
            "scheduler": self.scheduler,
            "seed": self.seed,
            "jitter": self.jitter,
            "shuffle_mode": self.shuffle_mode,
            "meta": self.meta,
        }
        lines = [_dumps(head)]
        for row in self.jobs:
            body = {"record": "job"}
            body.update((f.name, getattr(row, f.name)) for f in fields(JobReport))
            lines.append(_dumps(body))
        tail = {"record": "aggregates"}
        tail.update(self.aggregates.as_dict())
        lines.append(_dumps(tail))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_json_lines(cls, text: str) -> "SimReport":
        head = None
        rows: list[JobReport] = []
        agg = None
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"report line {number}: {exc}") from exc
            kind = obj.pop("record", None)
            try:
                if kind == "run":
                    head = obj
                elif kind == "job":
                    rows.append(JobReport(**obj))
                elif kind == "aggregates":
                    agg = RunAggregates(**obj)
                else:
                    raise ParseError(
                        f"report line {number}: unknown record {kind!r}")
            except TypeError as exc:
                raise ParseError(f"report line {number}: {exc}") from None
        if head is None or agg is None:
            raise ParseError("report is missing its run header or aggregates")
        return cls(
            scheduler=head["scheduler"],
            seed=head["seed"],
            jitter=head["jitter"],
            shuffle_mode=head["shuffle_mode"],
            jobs=tuple(rows),
            aggregates=agg,
            meta=head.get("meta", {}),
        )

    def to_csv(self) -> str:
        lines = [",".join(JOB_CSV_COLUMNS)]
        for row in self.jobs:
            lines.append(
                ",".join(_csv_cell(getattr(row, name)) for name in JOB_CSV_COLUMNS)
            )
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        agg = self.aggregates
        out = [
            f"run: scheduler={self.scheduler} seed={self.seed} "
            f"jitter={self.jitter} shuffle={self.shuffle_mode}",
            "",
            f"{'job':<28}{'type':<22}{'GiB':>6}{'turnaround':>12}"
            f"{'met':>5}{'local':>7}{'maps':>6}{'defer':>7}",
        ]
        for j in self.jobs:
            out.append(
                f"{j.job_id:<28}{j.job_type:<22}"
                f"{j.input_bytes / (1 << 30):>6.1f}{j.turnaround:>12.1f}"
                f"{'yes' if j.deadline_met else 'NO':>5}"
                f"{j.local_map_launches:>7}{j.map_launches:>6}"
                f"{j.deferred_count:>7}"
            )
        out += [
            "",
            f"jobs {agg.job_count}  makespan {agg.makespan:.1f}s  "
            f"throughput {agg.throughput:.6f} jobs/s",
            f"mean completion {agg.mean_completion:.1f}s  "
            f"deadline misses {agg.deadline_misses}",
            f"map locality {agg.map_locality_rate:.4f}  "
            f"fallback fraction {agg.fallback_fraction:.4f}",
            f"core moves {agg.core_moves}  elided {agg.elided_matches}  "
            f"deferred {agg.deferred_tasks}  reverted {agg.reverted_tasks}",
            f"violations {agg.violation_count}",
        ]
        return "\n".join(out) + "\n"


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


REPORT_FORMATS = ("json-lines", "csv", "table")


def emit_report(report: SimReport, fmt: str, path) -> None:
    """Write ``report`` to ``path``; re-emission is byte-identical."""
    if fmt == "json-lines":
        text = report.to_json_lines()
    elif fmt == "csv":
        text = report.to_csv()
    elif fmt == "table":
        text = report.to_table()
    else:
        from .errors import UsageError

        raise UsageError(
            f"unknown report format {fmt!r}; choose from {', '.join(REPORT_FORMATS)}"
        )
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


# ----------------------------------------------------- building from a run


def build_report(result: SimResult) -> SimReport:
    """Summarize a finished simulation into a SimReport."""
    rows = []
    turnarounds = []
    all_waits = []
    for job_id in sorted(result.jobs):
        run = result.jobs[job_id]
        spec = run.spec
        if run.completion_time is None:
            raise ComparisonError(f"job {job_id} never completed; cannot report")
        turnaround = run.completion_time - spec.submit_time
        turnarounds.append(turnaround)
        launches = (
            run.local_map_launches
            + run.remote_map_launches
        )
        # fsum everywhere a mean is formed: correctly-rounded sums make
        # the report equal its trace replay bit for bit, regardless of
        # accumulation order.
        job_wait_sum = math.fsum(run.defer_waits)
        all_waits.extend(run.defer_waits)
        rows.append(
            JobReport(
                job_id=job_id,
                job_type=spec.job_type,
                input_bytes=spec.input_size,
                submit_time=spec.submit_time,
                deadline=spec.deadline,
                absolute_deadline=spec.absolute_deadline,
                turnaround=turnaround,
                deadline_met=run.completion_time <= spec.absolute_deadline,
                map_tasks=run.state.map_task_count,
                reduce_tasks=spec.reduce_task_count,
                map_launches=launches,
                local_map_launches=run.local_map_launches,
                remote_map_launches=run.remote_map_launches,
                fallback_map_launches=run.fallback_map_launches,
                reduce_launches=run.reduce_launches,
                deferred_count=run.deferred_count,
                mean_defer_wait=(
                    job_wait_sum / len(run.defer_waits) if run.defer_waits else 0.0
                ),
                map_locality_rate=(
                    run.local_map_launches / launches if launches else 0.0
                ),
            )
        )
    counters = result.counters
    job_count = len(rows)
    map_launches = counters.map_launches
    aggregates = RunAggregates(
        job_count=job_count,
        makespan=result.makespan,
        throughput=job_count / result.makespan if result.makespan > 0 else 0.0,
        mean_completion=math.fsum(turnarounds) / job_count if job_count else 0.0,
        deadline_misses=sum(1 for r in rows if not r.deadline_met),
        map_launches=map_launches,
        local_map_launches=counters.local_map_launches,
        remote_map_launches=counters.remote_map_launches,
        fallback_launches=counters.fallback_launches,
        grant_launches=counters.grant_launches,
        map_locality_rate=(
            counters.local_map_launches / map_launches if map_launches else 0.0
        ),
        fallback_fraction=(
            counters.fallback_launches / map_launches if map_launches else 0.0
        ),
        reduce_launches=counters.reduce_launches,
        deferred_tasks=counters.deferred_tasks,
        mean_defer_wait=(
            math.fsum(all_waits) / len(all_waits) if all_waits else 0.0
        ),
        reverted_tasks=counters.reverted_tasks,
        core_moves=counters.core_moves,
        elided_matches=counters.elided_matches,
        withdrawals=counters.withdrawals,
        heartbeats=counters.heartbeats,
        violation_count=len(counters.violations),
    )
    return SimReport(
        scheduler=result.scheduler,
        seed=result.seed,
        jitter=result.params.jitter,
        shuffle_mode=result.params.shuffle_mode,
        jobs=tuple(rows),
        aggregates=aggregates,
        meta={"events": counters.events},
    )


# ------------------------------------------------------------- trace files


def write_trace_log(rows, path) -> None:
    """Write trace rows as the tab-separated log format."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(TRACE_FILE_HEADER + "\n")
        for row in rows:
            handle.write(row.to_line() + "\n")


def read_trace_log(path) -> list[TraceRow]:
    rows = []
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            try:
                rows.append(TraceRow.parse(line))
            except Exception as exc:
                raise ParseError(f"{path}:{number}: {exc}") from exc
    return rows


# ---------------------------------------------------------- trace replay


def replay_aggregates(rows) -> RunAggregates:
    """Recompute every aggregate from trace rows alone.

    This is the independent auditor: it never touches simulator state, so
    agreement with ``build_report`` (see ``check_replay``) certifies that
    the trace is a complete, faithful account of the run.
    """
    job_count = 0
    makespan = None
    turnarounds: dict[str, float] = {}
    met: dict[str, bool] = {}
    map_launches = local = remote = fallback = grant = 0
    reduce_launches = 0
    deferred = reverted = core_moves = elided = withdrawals = heartbeats = 0
    violations = 0
    # Defer times awaiting resolution, FIFO per task.
    open_defers: dict[tuple[str, str], list[float]] = {}
    # Waits in resolution order, grouped per job (matches engine bookkeeping).
    waits: dict[str, list[float]] = {}

    def resolve_defer(job: str, task: str, now: float) -> None:
        queue = open_defers.get((job, task))
        if not queue:
            raise ComparisonError(
                f"trace resolves a defer that never happened: {job}/{task}"
            )
        waits.setdefault(job, []).append(now - queue.pop(0))

    for row in rows:
        event = row.event
        if event == "job_arrival":
            job_count += 1
        elif event == "heartbeat":
            heartbeats += 1
        elif event == "launch":
            kind = row.detail_value("kind")
            origin = row.detail_value("origin")
            if kind == "map":
                map_launches += 1
                if row.local:
                    local += 1
                else:
                    remote += 1
                if origin == "fallback":
                    fallback += 1
                    resolve_defer(row.job, row.task, row.time)
                elif origin == "grant":
                    grant += 1
                    resolve_defer(row.job, row.task, row.time)
            else:
                reduce_launches += 1
        elif event == "defer":
            deferred += 1
            open_defers.setdefault((row.job, row.task), []).append(row.time)
        elif event == "revert":
            reverted += 1
            resolve_defer(row.job, row.task, row.time)
        elif event == "core_move":
            core_moves += 1
        elif event == "elide":
            elided += 1
        elif event == "withdraw":
            withdrawals += 1
        elif event == "violation":
            violations += 1
        elif event == "job_complete":
            turnarounds[row.job] = float(row.detail_value("completion"))
            met[row.job] = row.detail_value("met") == "1"
        elif event == "sim_end":
            makespan = float(row.detail_value("makespan"))
    if makespan is None:
        raise ComparisonError("trace has no sim_end row; cannot replay")
    leftovers = {k: v for k, v in open_defers.items() if v}
    if leftovers:
        raise ComparisonError(f"trace left defers unresolved: {sorted(leftovers)}")
    ordered_jobs = sorted(turnarounds)
    wait_sum = math.fsum(w for job in sorted(waits) for w in waits[job])
    wait_count = sum(len(v) for v in waits.values())
    completion_sum = math.fsum(turnarounds[j] for j in ordered_jobs)
    return RunAggregates(
        job_count=job_count,
        makespan=makespan,
        throughput=job_count / makespan if makespan > 0 else 0.0,
        mean_completion=completion_sum / len(ordered_jobs) if ordered_jobs else 0.0,
        deadline_misses=sum(1 for j in ordered_jobs if not met[j]),
        map_launches=map_launches,
        local_map_launches=local,
        remote_map_launches=remote,
        fallback_launches=fallback,
        grant_launches=grant,
        map_locality_rate=local / map_launches if map_launches else 0.0,
        fallback_fraction=fallback / map_launches if map_launches else 0.0,
        reduce_launches=reduce_launches,
        deferred_tasks=deferred,
        mean_defer_wait=wait_sum / wait_count if wait_count else 0.0,
        reverted_tasks=reverted,
        core_moves=core_moves,
        elided_matches=elided,
        withdrawals=withdrawals,
        heartbeats=heartbeats,
        violation_count=violations,
    )


def check_replay(report: SimReport, rows) -> None:
    """Raise ComparisonError unless the trace reproduces every aggregate."""
    replayed = replay_aggregates(rows)
    mismatches = []
    for f in fields(RunAggregates):
        got = getattr(replayed, f.name)
        expected = getattr(report.aggregates, f.name)
        if got != expected:
            mismatches.append(f"{f.name}: report={expected!r} replay={got!r}")
    if mismatches:
        raise ComparisonError("trace replay diverged: " + "; ".join(mismatches))


# -------------------------------------------------------------- comparison


@dataclass(frozen=True)
class TypeGap:
    """Per-job-type mean completions under both runs and their relative gap."""

    job_type: str
    mean_a: float
    mean_b: float
    relative_gap: float  # (mean_a - mean_b) / mean_b


@dataclass(frozen=True)
class ComparisonReport:
    """Relative deltas of run A over run B (B is the baseline)."""

    scheduler_a: str
    scheduler_b: str
    throughput_gain: float
    mean_completion_delta: float
    locality_delta: float | None
    type_gaps: tuple[TypeGap, ...]

    def to_text(self) -> str:
        lines = [
            f"comparison: {self.scheduler_a} vs {self.scheduler_b} (baseline)",
            f"throughput gain       {self.throughput_gain * 100:+.2f}%",
            f"mean completion delta {self.mean_completion_delta * 100:+.2f}%",
        ]
        if self.locality_delta is None:
            lines.append("locality delta        n/a (baseline locality is zero)")
        else:
            lines.append(
                f"locality delta        {self.locality_delta * 100:+.2f}%"
            )
        lines.append("")
        lines.append(f"{'type':<24}{'mean A':>10}{'mean B':>10}{'rel gap':>10}")
        for gap in self.type_gaps:
            lines.append(
                f"{gap.job_type:<24}{gap.mean_a:>10.1f}{gap.mean_b:>10.1f}"
                f"{gap.relative_gap * 100:>9.2f}%"
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        body = {
            "scheduler_a": self.scheduler_a,
            "scheduler_b": self.scheduler_b,
            "throughput_gain": self.throughput_gain,
            "mean_completion_delta": self.mean_completion_delta,
            "locality_delta": self.locality_delta,
            "type_gaps": [
                {
                    "job_type": g.job_type,
                    "mean_a": g.mean_a,
                    "mean_b": g.mean_b,
                    "relative_gap": g.relative_gap,
                }
                for g in self.type_gaps
            ],
        }
        return _dumps(body) + "\n"


def compare(a: SimReport, b: SimReport) -> ComparisonReport:
    """Relative deltas of ``a`` over baseline ``b``; workloads must match."""
    if a.workload_identity() != b.workload_identity():
        raise ComparisonError(
            "reports describe different workloads and cannot be compared"
        )
    agg_a, agg_b = a.aggregates, b.aggregates
    if agg_b.throughput <= 0 or agg_b.mean_completion <= 0:
        raise ComparisonError("baseline report has degenerate aggregates")
    by_type_a = a.mean_completion_by_type()
    by_type_b = b.mean_completion_by_type()
    gaps = tuple(
        TypeGap(
            job_type=t,
            mean_a=by_type_a[t],
            mean_b=by_type_b[t],
            relative_gap=(by_type_a[t] - by_type_b[t]) / by_type_b[t],
        )
        for t in sorted(by_type_a)
    )
    return ComparisonReport(
        scheduler_a=a.scheduler,
        scheduler_b=b.scheduler,
        throughput_gain=(agg_a.throughput - agg_b.throughput) / agg_b.throughput,
        mean_completion_delta=(
            (agg_a.mean_completion - agg_b.mean_completion) / agg_b.mean_completion
        ),
        locality_delta=(
            (agg_a.map_locality_rate - agg_b.map_locality_rate)
            / agg_b.map_locality_rate
            if agg_b.map_locality_rate > 0
            else None
        ),
        type_gaps=gaps,
    )


# -------------------------------------------------------- experiment driver


@dataclass(frozen=True)
class RunRequest:
    """One cell of an experiment matrix."""

    scheduler: str
    workload: str  # preset name or path to a workload trace file
    seed: int
    jitter: float | None = None
    shuffle_mode: str | None = None


@dataclass(frozen=True)
class RunOutcome:
    """A finished (or failed) matrix cell; ``error`` is None on success."""

    request: RunRequest
    report: SimReport | None
    error: str | None


def load_jobs(workload: str, seed, config: ClusterConfig | None = None):
    """Resolve a workload argument: preset name first, then trace file path."""
    if workload in PRESETS:
        return synth_workload(workload, seed=seed, config=config)
    if os.path.exists(workload):
        return parse_trace(workload)
    raise ConfigError(
        f"workload {workload!r} is neither a preset "
        f"({', '.join(sorted(PRESETS))}) nor an existing file"
    )


def _run_cell(args) -> RunOutcome:
    request, config = args
    try:
        jobs = load_jobs(request.workload, request.seed, config)
        overrides = {}
        if request.jitter is not None:
            overrides["jitter"] = request.jitter
        if request.shuffle_mode is not None:
            overrides["shuffle_mode"] = request.shuffle_mode
        params = SimulationParams(
            scheduler=request.scheduler, seed=request.seed, **overrides
        )
        result = run_simulation(jobs, config=config, params=params)
        return RunOutcome(request, build_report(result), None)
    except Exception as exc:  # mark the cell, never abort the matrix
        return RunOutcome(request, None, f"{type(exc).__name__}: {exc}")


def run_experiment(
    matrix: list[RunRequest],
    parallelism: int = 1,
    config: ClusterConfig | None = None,
) -> list[RunOutcome]:
    """Run every matrix cell; failures are marked in place, never raised."""
    if parallelism < 1:
        raise ConfigError("parallelism must be at least 1")
    work = [(request, config) for request in matrix]
    if parallelism == 1 or len(matrix) <= 1:
        return [_run_cell(item) for item in work]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_run_cell, work))
