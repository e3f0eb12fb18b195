"""Discrete-event simulation of the virtualized MapReduce cluster.

Time advances through a priority queue of events: job arrivals, per-VM
heartbeats, task completions, core-move landings, and starvation-guard
timeouts for parked tasks. Every random draw comes from a stream seeded
by a string derived from the run seed, so identical inputs replay into
identical traces.

Heartbeat times live on an integer tick grid (2^-16 s resolution) so
consecutive heartbeats of a VM are spaced by exactly the configured
interval in float arithmetic, not merely approximately.

Execution model notes:

* A map task reading a remote block pays a fixed network penalty of
  ``block_size / network_bandwidth`` seconds on top of its runtime.
* The shuffle is not simulated copy-by-copy. When the last map task of a
  job finishes, the job's reduce tasks become launchable only after the
  serialized copy time has elapsed (``maps * reduces * copy_time``; the
  optional ``parallel`` mode shortens this to ``maps * copy_time``).
* Under the deadline scheduler a map task never launches on a VM without
  its block. It is parked on a replica holder instead, and the idle slot
  donates a core toward it. A parked task launches at its target when a
  core move lands or at the target's heartbeat; after ten heartbeat
  intervals a starvation guard launches it remotely at the parking
  node or, failing that, returns it to the unstarted pool.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field

from .cluster import (
    ClusterConfig,
    ClusterTopology,
    JobSpec,
    JobState,
    TaskState,
    build_cluster,
    place_blocks,
)
from .errors import (
    ConfigError,
    ContractViolation,
    DuplicateJob,
    RunawaySimulation,
)
from .estimator import JobTimingModel, SlotDemand, TaskRecord, recompute_demand
from .reconfig import (
    CoreMove,
    DeferredLaunch,
    ElidedLaunch,
    LocalLaunch,
    ReconfigState,
    assign_map_task,
)
from .schedulers import make_scheduler
from .workload import DEFAULT_PROFILES

TICKS_PER_SECOND = 65536  # heartbeat time grid: 2^-16 s, exact in floats

TRACE_COLUMNS = ("time", "event", "job", "task", "vm", "local", "detail")
TRACE_FILE_HEADER = "# " + "\t".join(TRACE_COLUMNS)


@dataclass(frozen=True)
class TraceRow:
    """One line of the run trace; round-trips exactly through text."""

    time: float
    event: str
    job: str = "-"
    task: str = "-"
    vm: int | None = None
    local: bool | None = None
    detail: str = "-"

    def to_line(self) -> str:
        return "\t".join(
            (
                repr(self.time),
                self.event,
                self.job or "-",
                self.task or "-",
                "-" if self.vm is None else str(self.vm),
                "-" if self.local is None else str(int(self.local)),
                self.detail or "-",
            )
        )

    @classmethod
    def parse(cls, line: str) -> "TraceRow":
        parts = line.rstrip("\n").split("\t")
        if len(parts) != len(TRACE_COLUMNS):
            raise ContractViolation(f"trace line has {len(parts)} columns: {line!r}")
        time_s, event, job, task, vm_s, local_s, detail = parts
        return cls(
            time=float(time_s),
            event=event,
            job=job,
            task=task,
            vm=None if vm_s == "-" else int(vm_s),
            local=None if local_s == "-" else bool(int(local_s)),
            detail=detail,
        )

    def detail_value(self, key: str) -> str:
        for piece in self.detail.split(","):
            name, _, value = piece.partition("=")
            if name == key:
                return value
        raise KeyError(f"{key} not in detail {self.detail!r}")


@dataclass(frozen=True)
class SimulationParams:
    """Per-run knobs independent of the cluster shape."""

    scheduler: str = "ct"
    seed: str | int = 0
    jitter: float = 0.05
    shuffle_mode: str = "serial"  # or "parallel"
    defer_timeout_heartbeats: int = 10
    max_events: int = 5_000_000
    keep_trace: bool = False

    def validate(self) -> "SimulationParams":
        if not 0.0 <= self.jitter < 1.0:
            raise ConfigError("jitter must be in [0, 1)")
        if self.shuffle_mode not in ("serial", "parallel"):
            raise ConfigError("shuffle_mode must be serial or parallel")
        if self.defer_timeout_heartbeats < 1:
            raise ConfigError("defer timeout must be at least one heartbeat")
        if self.max_events < 1:
            raise ConfigError("max_events must be positive")
        return self


@dataclass
class SimCounters:
    events: int = 0
    heartbeats: int = 0
    map_launches: int = 0
    reduce_launches: int = 0
    local_map_launches: int = 0
    remote_map_launches: int = 0
    fallback_launches: int = 0
    grant_launches: int = 0
    deferred_tasks: int = 0
    reverted_tasks: int = 0
    core_moves: int = 0
    elided_matches: int = 0
    withdrawals: int = 0
    violations: list = field(default_factory=list)


@dataclass(frozen=True)
class DeferredTask:
    job_id: str
    target_vm: int
    origin_vm: int
    defer_time: float


class JobRun:
    """One job's full runtime context inside a simulation."""

    def __init__(self, spec: JobSpec, placement, profile, config: ClusterConfig,
                 shuffle_mode: str):
        map_count = spec.map_task_count(config.block_size)
        if placement.block_count != map_count:
            raise ContractViolation(
                f"job {spec.job_id}: placement covers {placement.block_count} "
                f"blocks, job has {map_count}"
            )
        self.spec = spec
        self.job_id = spec.job_id
        self.state = JobState(spec, map_count)
        self.placement = placement
        self.base_map_time = profile.base_map_time_per_block
        self.base_reduce_time = profile.reduce_time
        if spec.reduce_task_count > 0:
            total_bytes = profile.intermediate_bytes(spec.input_size)
            per_pair = total_bytes / (map_count * spec.reduce_task_count)
            self.shuffle_copy_time = per_pair / config.network_bandwidth
        else:
            self.shuffle_copy_time = 0.0
        self.shuffle_mode = shuffle_mode
        # Carrier for the estimator: only its copy time is read.
        self.model_carrier = JobTimingModel(0, 0, 0.0, self.shuffle_copy_time)
        self.block_of = {t: i for i, t in enumerate(self.state.map_ids)}
        self.pending_maps = deque(self.state.map_ids)
        self.local_pending = {
            vm: deque(self.state.map_ids[b] for b in blocks)
            for vm, blocks in placement.blocks_by_vm.items()
            if blocks
        }
        self.pending_reduces = deque(self.state.reduce_ids)
        self.completion_time: float | None = None
        self.local_map_launches = 0
        self.remote_map_launches = 0
        self.fallback_map_launches = 0
        self.reduce_launches = 0
        self.deferred_count = 0
        self.defer_waits: list[float] = []

    def reduce_ready(self, now: float) -> bool:
        gate = self.state.shuffle_ready_time
        return gate is not None and now >= gate

    def shuffle_total(self) -> float:
        if self.spec.reduce_task_count == 0:
            return 0.0
        pairs = self.state.map_task_count
        if self.shuffle_mode == "serial":
            pairs *= self.spec.reduce_task_count
        return pairs * self.shuffle_copy_time

    def _peek(self, queue) -> str | None:
        while queue and self.state.phase[queue[0]] != "unstarted":
            queue.popleft()
        return queue[0] if queue else None

    def peek_local_unassigned(self, vm_id: int) -> str | None:
        queue = self.local_pending.get(vm_id)
        return self._peek(queue) if queue is not None else None

    def peek_any_unassigned(self) -> str | None:
        return self._peek(self.pending_maps)

    def next_unstarted_reduce(self) -> str | None:
        return self._peek(self.pending_reduces)

    def replica_vms(self, task_id: str):
        return self.placement.holders(self.block_of[task_id])

    def is_local(self, task_id: str, vm_id: int) -> bool:
        return self.placement.is_local(self.block_of[task_id], vm_id)

    def requeue_map(self, task_id: str) -> None:
        """Put a reverted task back where the pickers can see it."""
        self.pending_maps.append(task_id)
        for vm in self.replica_vms(task_id):
            queue = self.local_pending.setdefault(vm, deque())
            if task_id not in queue:
                queue.append(task_id)


@dataclass
class SimResult:
    """Everything a finished simulation knows about itself."""

    scheduler: str
    seed: str
    config: ClusterConfig
    params: SimulationParams
    jobs: dict[str, JobRun]
    counters: SimCounters
    makespan: float
    trace_rows: list[TraceRow] | None


class Simulation:
    def __init__(self, jobs: list[JobSpec], config: ClusterConfig | None = None,
                 params: SimulationParams | None = None, profiles=None,
                 placements=None):
        self.config = (config or ClusterConfig()).validate()
        self.params = (params or SimulationParams()).validate()
        self.topology: ClusterTopology = build_cluster(self.config)
        self.policy = make_scheduler(self.params.scheduler)
        self.reconfig = ReconfigState(self.topology)
        profiles = profiles or DEFAULT_PROFILES
        placements = placements or {}

        self.jobs: dict[str, JobRun] = {}
        for spec in sorted(jobs, key=lambda s: (s.submit_time, s.job_id)):
            if spec.job_id in self.jobs:
                raise DuplicateJob(f"job id {spec.job_id} submitted twice")
            if spec.job_type not in profiles:
                raise ConfigError(f"no profile for job type {spec.job_type!r}")
            placement = placements.get(spec.job_id)
            if placement is None:
                placement = place_blocks(
                    spec, self.topology,
                    seed=f"{self.params.seed}/placement/{spec.job_id}",
                )
            self.jobs[spec.job_id] = JobRun(
                spec, placement, profiles[spec.job_type], self.config,
                self.params.shuffle_mode,
            )

        self.now = 0.0
        self.heap: list = []
        self.seq = 0
        self.active_jobs: list[JobRun] = []
        self.completed_jobs = 0
        self.counters = SimCounters()
        self.trace_rows: list[TraceRow] | None = [] if self.params.keep_trace else None
        self.running_tasks: dict[str, TaskState] = {}
        self.deferred_info: dict[str, DeferredTask] = {}
        self.granted: dict[int, deque] = {v: deque() for v in self.topology.vms}
        self.total_map_slots = self.config.total_map_slots
        self.total_reduce_slots = self.config.total_reduce_slots
        self.interval_ticks = max(1, round(self.config.heartbeat_interval * TICKS_PER_SECOND))
        self.hb_tick: dict[int, int] = {}
        self.defer_timeout = (
            self.params.defer_timeout_heartbeats * self.config.heartbeat_interval
        )

    # ------------------------------------------------------------- plumbing

    def _push(self, time: float, kind: str, payload) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (time, self.seq, kind, payload))

    def trace(self, event: str, job: str = "-", task: str = "-",
              vm: int | None = None, local: bool | None = None,
              detail: str = "-") -> None:
        if self.trace_rows is not None:
            self.trace_rows.append(
                TraceRow(self.now, event, job, task, vm, local, detail)
            )

    def violation(self, kind: str, detail: str) -> None:
        self.counters.violations.append((self.now, kind, detail))
        if self.trace_rows is not None:
            self.trace_rows.append(
                TraceRow(self.now, "violation", detail=f"kind={kind},{detail}")
            )

    # ------------------------------------------------------------------ run

    def run(self) -> SimResult:
        if self.jobs:
            for spec_job in self.jobs.values():
                self._push(spec_job.spec.submit_time, "job_arrival", spec_job.job_id)
            vm_count = len(self.topology.vms)
            for index, vm_id in enumerate(sorted(self.topology.vms)):
                first_tick = (index * self.interval_ticks) // vm_count
                self.hb_tick[vm_id] = first_tick
                self._push(first_tick / TICKS_PER_SECOND, "heartbeat", vm_id)

        handlers = {
            "job_arrival": self._on_job_arrival,
            "heartbeat": self._on_heartbeat,
            "task_finish": self._on_task_finish,
            "reconfig_effective": self._on_reconfig_effective,
            "deferred_timeout": self._on_deferred_timeout,
        }
        while self.heap and self.completed_jobs < len(self.jobs):
            time, _, kind, payload = heapq.heappop(self.heap)
            if time < self.now:
                raise ContractViolation(f"event time {time} behind clock {self.now}")
            self.now = time
            self.counters.events += 1
            if self.counters.events > self.params.max_events:
                raise RunawaySimulation(
                    f"exceeded {self.params.max_events} events at t={self.now}"
                )
            handlers[kind](payload)
        if self.completed_jobs < len(self.jobs):
            raise ContractViolation("event queue drained with jobs unfinished")

        makespan = 0.0
        if self.jobs:
            first_submit = min(j.spec.submit_time for j in self.jobs.values())
            last_done = max(j.completion_time for j in self.jobs.values())
            makespan = last_done - first_submit
        self.trace("sim_end", detail=f"makespan={makespan!r}")
        return SimResult(
            scheduler=self.policy.name,
            seed=str(self.params.seed),
            config=self.config,
            params=self.params,
            jobs=self.jobs,
            counters=self.counters,
            makespan=makespan,
            trace_rows=self.trace_rows,
        )

    # ------------------------------------------------------------- handlers

    def _on_job_arrival(self, job_id: str) -> None:
        job = self.jobs[job_id]
        self.active_jobs.append(job)
        spec = job.spec
        self.trace(
            "job_arrival", job=job_id,
            detail=(
                f"type={spec.job_type},size={spec.input_size},"
                f"maps={job.state.map_task_count},reduces={spec.reduce_task_count},"
                f"deadline={spec.deadline!r}"
            ),
        )

    def _on_heartbeat(self, vm_id: int) -> None:
        self.counters.heartbeats += 1
        self.trace("heartbeat", vm=vm_id)
        vm = self.topology.vms[vm_id]
        self._launch_grants(vm)
        if self.policy.uses_reconfiguration:
            self._deadline_map_loop(vm)
        else:
            self._baseline_map_loop(vm)
        self._reduce_loop(vm)
        if self.policy.uses_reconfiguration:
            if self.reconfig.register_release(vm, self.now) > 0:
                self._sweep(vm.pm_id)
        next_tick = self.hb_tick[vm_id] + self.interval_ticks
        self.hb_tick[vm_id] = next_tick
        self._push(next_tick / TICKS_PER_SECOND, "heartbeat", vm_id)

    def _on_task_finish(self, task_id: str) -> None:
        task = self.running_tasks.pop(task_id)
        job = self.jobs[task.job_id]
        vm = self.topology.vms[task.vm_id]
        vm.finish_task(task.kind)
        job.state.set_phase(task_id, "done")
        del job.state.running[task_id]
        job.state.completed_records.append(
            TaskRecord(task_id, task.kind, task.duration, task.vm_id, task.local)
        )
        self.trace(
            "task_finish", job=job.job_id, task=task_id, vm=task.vm_id,
            local=task.local if task.kind == "map" else None,
            detail=f"kind={task.kind},duration={task.duration!r}",
        )
        if task.kind == "map" and job.state.map_finished:
            gate = self.now + job.shuffle_total()
            job.state.shuffle_ready_time = gate
            self.trace("map_phase_done", job=job.job_id,
                       detail=f"shuffle_ready={gate!r}")
        if job.state.is_complete:
            job.completion_time = self.now
            self.completed_jobs += 1
            self.active_jobs.remove(job)
            met = self.now <= job.spec.absolute_deadline
            self.trace(
                "job_complete", job=job.job_id,
                detail=(
                    f"completion={self.now - job.spec.submit_time!r},met={int(met)}"
                ),
            )
        elif self.policy.uses_reconfiguration:
            self._refresh_demand(job)
        if self.policy.uses_reconfiguration and self.completed_jobs < len(self.jobs):
            if self.reconfig.register_release(vm, self.now) > 0:
                self._sweep(vm.pm_id)

    def _on_reconfig_effective(self, move: CoreMove) -> None:
        self.reconfig.apply_core_move(move)
        self.counters.core_moves += 1
        try:
            self.topology.check_core_conservation()
        except ContractViolation as exc:
            self.violation("core_conservation", f"detail={exc}")
            raise
        pm = self.topology.pm_of(move.to_vm)
        self.trace(
            "reconfig_effective", job=move.job_id, task=move.task_id,
            vm=move.to_vm, detail=f"from={move.from_vm},to={move.to_vm},pm={pm}",
        )
        info = self.deferred_info.get(move.task_id)
        if info is None or info.target_vm != move.to_vm:
            return
        job = self.jobs[info.job_id]
        if job.state.phase[move.task_id] != "deferred":
            return
        vm = self.topology.vms[move.to_vm]
        if vm.launch_headroom("map") >= 1:
            self._launch_deferred(move.task_id, vm, origin="grant")

    def _on_deferred_timeout(self, task_id: str) -> None:
        info = self.deferred_info.get(task_id)
        if info is None:
            return
        job = self.jobs[info.job_id]
        if job.state.phase[task_id] != "deferred":
            return
        self.reconfig.purge_assign(task_id)
        origin = self.topology.vms[info.origin_vm]
        if origin.launch_headroom("map") >= 1:
            self._launch_deferred(task_id, origin, origin="fallback")
            return
        self.deferred_info.pop(task_id)
        job.defer_waits.append(self.now - info.defer_time)
        job.state.set_phase(task_id, "unstarted")
        job.requeue_map(task_id)
        self.counters.reverted_tasks += 1
        self.trace("revert", job=job.job_id, task=task_id,
                   detail=f"origin={info.origin_vm}")

    # ----------------------------------------------------- scheduling loops

    def _launch_grants(self, vm) -> None:
        """Start parked tasks that were promised this VM, oldest first."""
        queue = self.granted[vm.vm_id]
        while queue:
            task_id = queue[0]
            info = self.deferred_info.get(task_id)
            if (
                info is None
                or info.target_vm != vm.vm_id
                or self.jobs[info.job_id].state.phase[task_id] != "deferred"
            ):
                queue.popleft()
                continue
            if vm.launch_headroom("map") < 1:
                return
            queue.popleft()
            self._launch_deferred(task_id, vm, origin="grant")

    def _first_eligible(self, order, kind: str):
        for job in order:
            if kind == "map":
                if self.policy.map_eligible(job, self.now, self.total_map_slots):
                    return job
            else:
                if self.policy.reduce_eligible(job, self.now, self.total_reduce_slots):
                    return job
        return None

    def _audit_priority(self, order, picked, kind: str) -> None:
        """Every job ahead of the picked one must be truly ineligible."""
        for job in order:
            if job is picked:
                return
            eligible = (
                self.policy.map_eligible(job, self.now, self.total_map_slots)
                if kind == "map"
                else self.policy.reduce_eligible(job, self.now, self.total_reduce_slots)
            )
            if eligible:
                self.violation(
                    "priority_order",
                    f"job={picked.job_id},skipped={job.job_id},kind={kind}",
                )

    def _deadline_map_loop(self, vm) -> None:
        while vm.launch_headroom("map") >= 1:
            order = self.policy.map_order(self.active_jobs, self.now, self.total_map_slots)
            picked = self._first_eligible(order, "map")
            if picked is None:
                return
            self._audit_priority(order, picked, "map")
            action = assign_map_task(picked, vm.vm_id, self.reconfig, self.now)
            if action is None:
                raise ContractViolation(
                    f"job {picked.job_id} eligible but offered no map task"
                )
            if isinstance(action, LocalLaunch):
                self._launch(picked, action.task_id, vm, "map", local=True,
                             origin="sched")
                continue
            self._defer(picked, action, vm)
            return  # this node's spare capacity is pledged to the move

    def _defer(self, job: JobRun, action: DeferredLaunch, origin_vm) -> None:
        task_id = action.task_id
        job.state.set_phase(task_id, "deferred")
        self.deferred_info[task_id] = DeferredTask(
            job_id=job.job_id, target_vm=action.target_vm,
            origin_vm=origin_vm.vm_id, defer_time=self.now,
        )
        self.granted[action.target_vm].append(task_id)
        job.deferred_count += 1
        self.counters.deferred_tasks += 1
        self.trace(
            "defer", job=job.job_id, task=task_id, vm=action.target_vm,
            detail=f"origin={origin_vm.vm_id},donated={int(action.donor_registered)}",
        )
        self._push(self.now + self.defer_timeout, "deferred_timeout", task_id)
        target_pm = self.topology.pm_of(action.target_vm)
        self._sweep(target_pm)
        if action.donor_registered and origin_vm.pm_id != target_pm:
            self._sweep(origin_vm.pm_id)

    def _baseline_map_loop(self, vm) -> None:
        while vm.launch_headroom("map") >= 1:
            order = self.policy.map_order(self.active_jobs, self.now, self.total_map_slots)
            picked = self._first_eligible(order, "map")
            if picked is None:
                return
            task_id = picked.peek_local_unassigned(vm.vm_id)
            if task_id is None:
                task_id = picked.peek_any_unassigned()
            if task_id is None:
                raise ContractViolation(
                    f"job {picked.job_id} eligible but offered no map task"
                )
            local = picked.is_local(task_id, vm.vm_id)
            self._launch(picked, task_id, vm, "map", local=local, origin="sched")

    def _reduce_loop(self, vm) -> None:
        while vm.launch_headroom("reduce") >= 1:
            order = self.policy.reduce_order(self.active_jobs, self.now,
                                             self.total_reduce_slots)
            picked = self._first_eligible(order, "reduce")
            if picked is None:
                return
            if self.policy.uses_reconfiguration:
                self._audit_priority(order, picked, "reduce")
            task_id = picked.next_unstarted_reduce()
            if task_id is None:
                raise ContractViolation(
                    f"job {picked.job_id} eligible but offered no reduce task"
                )
            self._launch(picked, task_id, vm, "reduce", local=True, origin="sched")

    # ------------------------------------------------------------ launching

    def _task_duration(self, job: JobRun, task_id: str, kind: str, local: bool) -> float:
        base = job.base_map_time if kind == "map" else job.base_reduce_time
        factor = 1.0
        if self.params.jitter > 0.0:
            rng = random.Random(f"{self.params.seed}/jit/{task_id}")
            factor += rng.uniform(-self.params.jitter, self.params.jitter)
        duration = base * factor
        if kind == "map" and not local:
            duration += self.config.block_size / self.config.network_bandwidth
        return duration

    def _launch(self, job: JobRun, task_id: str, vm, kind: str, local: bool,
                origin: str) -> None:
        while vm.launch_needs_withdrawal(kind):
            if not self.reconfig.withdraw_release(vm):
                raise ContractViolation(
                    f"vm {vm.vm_id} has headroom but no reclaimable core"
                )
            self.counters.withdrawals += 1
            self.trace("withdraw", vm=vm.vm_id)
        vm.start_task(kind)
        duration = self._task_duration(job, task_id, kind, local)
        task = TaskState(
            task_id=task_id, job_id=job.job_id, kind=kind, vm_id=vm.vm_id,
            start_time=self.now, duration=duration,
            block_index=job.block_of.get(task_id), local=local,
        )
        job.state.set_phase(task_id, "running")
        job.state.running[task_id] = task
        self.running_tasks[task_id] = task
        self._push(self.now + duration, "task_finish", task_id)
        if kind == "map":
            self.counters.map_launches += 1
            if local:
                self.counters.local_map_launches += 1
                job.local_map_launches += 1
            else:
                self.counters.remote_map_launches += 1
                job.remote_map_launches += 1
            if origin == "fallback":
                self.counters.fallback_launches += 1
                job.fallback_map_launches += 1
            elif origin == "grant":
                self.counters.grant_launches += 1
        else:
            self.counters.reduce_launches += 1
            job.reduce_launches += 1
        self.trace(
            "launch", job=job.job_id, task=task_id, vm=vm.vm_id,
            local=local if kind == "map" else None,
            detail=f"kind={kind},origin={origin},duration={duration!r}",
        )
        if self.policy.uses_reconfiguration and origin == "sched":
            self._audit_demand(job, kind)

    def _audit_demand(self, job: JobRun, kind: str) -> None:
        if kind == "map":
            cap = self.policy.map_cap(job, self.now, self.total_map_slots)
            used = job.state.scheduled_map_count
        else:
            cap = self.policy.reduce_cap(job, self.now)
            used = job.state.scheduled_reduce_count
        if used > cap:
            self.violation(
                "demand_cap", f"job={job.job_id},kind={kind},used={used},cap={cap}"
            )

    def _launch_deferred(self, task_id: str, vm, origin: str) -> None:
        info = self.deferred_info.pop(task_id)
        job = self.jobs[info.job_id]
        self.reconfig.purge_assign(task_id)
        job.defer_waits.append(self.now - info.defer_time)
        local = job.is_local(task_id, vm.vm_id)
        self._launch(job, task_id, vm, "map", local=local, origin=origin)

    # -------------------------------------------------------- reconfig glue

    def _sweep(self, pm_id: int) -> None:
        actions = self.reconfig.match_and_reconfigure(
            pm_id, self.now, self.config.reconfig_latency
        )
        for action in actions:
            if isinstance(action, CoreMove):
                self.trace(
                    "core_move", job=action.job_id, task=action.task_id,
                    detail=(
                        f"from={action.from_vm},to={action.to_vm},"
                        f"effective={action.effective_at!r}"
                    ),
                )
                self._push(action.effective_at, "reconfig_effective", action)
                continue
            assert isinstance(action, ElidedLaunch)
            self.counters.elided_matches += 1
            self.trace("elide", job=action.job_id, task=action.task_id,
                       vm=action.vm_id)
            info = self.deferred_info.get(action.task_id)
            if info is None or info.target_vm != action.vm_id:
                continue
            job = self.jobs[info.job_id]
            if job.state.phase[action.task_id] != "deferred":
                continue
            vm = self.topology.vms[action.vm_id]
            if vm.launch_headroom("map") >= 1:
                self._launch_deferred(action.task_id, vm, origin="grant")

    def _refresh_demand(self, job: JobRun) -> None:
        fresh = recompute_demand(job.state, job.model_carrier, self.now)
        old = job.state.current_demand
        if old is not None and (
            old.map_slots > fresh.map_slots or old.reduce_slots > fresh.reduce_slots
        ):
            # Granted parallelism is sticky: running ahead of plan must
            # not stretch the remaining phases toward the deadline.
            fresh = SlotDemand(
                map_slots=max(old.map_slots, fresh.map_slots),
                reduce_slots=max(old.reduce_slots, fresh.reduce_slots),
                feasible=fresh.feasible,
                continuous_map=fresh.continuous_map,
                continuous_reduce=fresh.continuous_reduce,
            )
        job.state.current_demand = fresh


def run_simulation(jobs, config=None, params=None, profiles=None,
                   placements=None) -> SimResult:
    """Build and run one simulation; the one-call entry point."""
    return Simulation(jobs, config=config, params=params, profiles=profiles,
                      placements=placements).run()
