"""Cluster, job, and task domain models.

The cluster is a set of physical machines, each hosting a fixed set of
virtual machines. VMs expose map and reduce slots; a slot can only run a
task while the VM has a spare core for it. Cores can later be moved
between VMs that share a physical machine, so ``core_count`` is mutable
state while the per-machine core sum stays constant.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .errors import ConfigError, ContractViolation, PlacementError

MiB = 1024 * 1024
GiB = 1024 * MiB


@dataclass(frozen=True)
class ClusterConfig:
    """Static shape of the simulated cluster."""

    physical_machine_count: int = 20
    vms_per_pm: int = 2
    cores_per_pm: int = 4
    cores_per_vm_initial: int = 2
    map_slots_per_vm: int = 2
    reduce_slots_per_vm: int = 2
    block_size: int = 64 * MiB
    replication_factor: int = 3
    network_bandwidth: float = 100.0 * MiB  # bytes per second
    heartbeat_interval: float = 3.0
    reconfig_latency: float = 1.0

    def validate(self) -> "ClusterConfig":
        if self.physical_machine_count < 1:
            raise ConfigError("need at least one physical machine")
        if self.vms_per_pm < 1:
            raise ConfigError("need at least one VM per physical machine")
        if self.cores_per_vm_initial < 1:
            raise ConfigError("each VM needs at least one core")
        if self.vms_per_pm * self.cores_per_vm_initial > self.cores_per_pm:
            raise ConfigError(
                "initial VM cores exceed the physical machine's core budget"
            )
        if self.map_slots_per_vm < 1:
            raise ConfigError("each VM needs at least one map slot")
        if self.reduce_slots_per_vm < 0:
            raise ConfigError("reduce slot count cannot be negative")
        if self.block_size <= 0:
            raise ConfigError("block size must be positive")
        if self.replication_factor < 1:
            raise ConfigError("replication factor must be at least 1")
        if self.replication_factor > self.vm_count:
            raise ConfigError("replication factor exceeds VM count")
        if self.network_bandwidth <= 0:
            raise ConfigError("network bandwidth must be positive")
        if self.heartbeat_interval <= 0:
            raise ConfigError("heartbeat interval must be positive")
        if self.reconfig_latency < 0:
            raise ConfigError("reconfiguration latency cannot be negative")
        return self

    @property
    def vm_count(self) -> int:
        return self.physical_machine_count * self.vms_per_pm

    @property
    def total_map_slots(self) -> int:
        return self.vm_count * self.map_slots_per_vm

    @property
    def total_reduce_slots(self) -> int:
        return self.vm_count * self.reduce_slots_per_vm

    @property
    def initial_cores_per_pm(self) -> int:
        """Core budget actually handed to one machine's VMs at start."""
        return self.vms_per_pm * self.cores_per_vm_initial


@dataclass
class VMState:
    """One virtual machine: slots, cores, and reservation bookkeeping.

    ``reserved_pending`` cores back unmatched release-queue entries and may
    be reclaimed for a launch on this VM; ``reserved_inflight`` cores back
    core moves already matched and must stay idle until the move lands.
    """

    vm_id: int
    pm_id: int
    core_count: int
    map_slots: int
    reduce_slots: int
    busy_map_slots: int = 0
    busy_reduce_slots: int = 0
    reserved_pending: int = 0
    reserved_inflight: int = 0

    @property
    def busy_total(self) -> int:
        return self.busy_map_slots + self.busy_reduce_slots

    @property
    def reserved_total(self) -> int:
        return self.reserved_pending + self.reserved_inflight

    @property
    def engaged_cores(self) -> int:
        """Cores pinned by running tasks.

        Each core carries one map slot and one reduce slot concurrently
        (the two kinds timeshare), so the binding core need is the busier
        kind, not the sum: a VM may run at most min(map_slots, core_count)
        maps and independently min(reduce_slots, core_count) reduces.
        """
        return max(self.busy_map_slots, self.busy_reduce_slots)

    def free_cores(self) -> int:
        """Cores neither pinned by running tasks nor promised to a move."""
        return self.core_count - self.engaged_cores - self.reserved_total

    def launch_headroom(self, kind: str) -> int:
        """How many tasks of ``kind`` could start now, counting pending
        reservations as reclaimable."""
        slots = self.map_slots if kind == "map" else self.reduce_slots
        busy = self.busy_map_slots if kind == "map" else self.busy_reduce_slots
        capacity = min(slots, self.core_count - self.reserved_inflight)
        return max(0, capacity - busy)

    def launch_needs_withdrawal(self, kind: str) -> bool:
        """Would starting ``kind`` now eat a core promised to a donation?"""
        new_maps = self.busy_map_slots + (1 if kind == "map" else 0)
        new_reduces = self.busy_reduce_slots + (1 if kind == "reduce" else 0)
        engaged = max(new_maps, new_reduces)
        return self.core_count - engaged - self.reserved_total < 0

    def start_task(self, kind: str) -> None:
        if self.launch_headroom(kind) < 1:
            raise ContractViolation(f"vm {self.vm_id} has no free {kind} capacity")
        # Reclaim a pending donation if the launch would consume its core.
        if self.launch_needs_withdrawal(kind):
            raise ContractViolation(
                f"vm {self.vm_id} needs a reservation withdrawn before launch"
            )
        if kind == "map":
            self.busy_map_slots += 1
        else:
            self.busy_reduce_slots += 1

    def finish_task(self, kind: str) -> None:
        if kind == "map":
            if self.busy_map_slots < 1:
                raise ContractViolation(f"vm {self.vm_id} has no running map task")
            self.busy_map_slots -= 1
        else:
            if self.busy_reduce_slots < 1:
                raise ContractViolation(f"vm {self.vm_id} has no running reduce task")
            self.busy_reduce_slots -= 1


@dataclass
class PhysicalMachine:
    pm_id: int
    vm_ids: list[int]


@dataclass
class ClusterTopology:
    """A built cluster: machines, VMs, and the conserved core baseline."""

    config: ClusterConfig
    machines: list[PhysicalMachine]
    vms: dict[int, VMState]

    def vms_on(self, pm_id: int) -> list[VMState]:
        return [self.vms[v] for v in self.machines[pm_id].vm_ids]

    def pm_of(self, vm_id: int) -> int:
        return self.vms[vm_id].pm_id

    def core_sum(self, pm_id: int) -> int:
        return sum(vm.core_count for vm in self.vms_on(pm_id))

    def total_cores(self) -> int:
        return sum(vm.core_count for vm in self.vms.values())

    def check_core_conservation(self) -> None:
        """Raise unless every machine still holds its initial core sum."""
        expected = self.config.initial_cores_per_pm
        for pm in self.machines:
            actual = self.core_sum(pm.pm_id)
            if actual != expected:
                raise ContractViolation(
                    f"pm {pm.pm_id} core sum {actual} != initial {expected}"
                )
        for vm in self.vms.values():
            if vm.core_count < 1:
                raise ContractViolation(f"vm {vm.vm_id} dropped below one core")


def build_cluster(config: ClusterConfig) -> ClusterTopology:
    """Materialize VM states from a validated configuration."""
    config.validate()
    machines = []
    vms: dict[int, VMState] = {}
    for pm_id in range(config.physical_machine_count):
        vm_ids = []
        for k in range(config.vms_per_pm):
            vm_id = pm_id * config.vms_per_pm + k
            vm_ids.append(vm_id)
            vms[vm_id] = VMState(
                vm_id=vm_id,
                pm_id=pm_id,
                core_count=config.cores_per_vm_initial,
                map_slots=config.map_slots_per_vm,
                reduce_slots=config.reduce_slots_per_vm,
            )
        machines.append(PhysicalMachine(pm_id=pm_id, vm_ids=vm_ids))
    return ClusterTopology(config=config, machines=machines, vms=vms)


@dataclass(frozen=True)
class JobSpec:
    """Immutable description of one submitted job."""

    job_id: str
    submit_time: float
    job_type: str
    input_size: int  # bytes
    deadline: float  # seconds, relative to submit_time
    reduce_task_count: int

    def __post_init__(self):
        if not self.job_id or any(c.isspace() for c in self.job_id):
            raise ContractViolation("job_id must be non-empty without whitespace")
        if self.submit_time < 0:
            raise ContractViolation("submit_time cannot be negative")
        if self.input_size <= 0:
            raise ContractViolation("input_size must be positive")
        if self.deadline <= 0:
            raise ContractViolation("deadline must be positive")
        if self.reduce_task_count < 0:
            raise ContractViolation("reduce_task_count cannot be negative")

    def map_task_count(self, block_size: int) -> int:
        return math.ceil(self.input_size / block_size)

    @property
    def absolute_deadline(self) -> float:
        return self.submit_time + self.deadline


@dataclass
class TaskState:
    """A task occupying a slot right now."""

    task_id: str
    job_id: str
    kind: str  # "map" or "reduce"
    vm_id: int
    start_time: float
    duration: float
    block_index: int | None = None
    local: bool = True

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration

    def elapsed(self, now: float) -> float:
        return min(max(0.0, now - self.start_time), self.duration)

    def remaining(self, now: float) -> float:
        return self.duration - self.elapsed(now)


@dataclass
class BlockPlacement:
    """Replica VM ids per input block of one job."""

    job_id: str
    replicas: list[tuple[int, ...]]
    blocks_by_vm: dict[int, list[int]] = field(default_factory=dict)

    @property
    def block_count(self) -> int:
        return len(self.replicas)

    def holders(self, block_index: int) -> tuple[int, ...]:
        return self.replicas[block_index]

    def is_local(self, block_index: int, vm_id: int) -> bool:
        return vm_id in self.replicas[block_index]


def place_blocks(job: JobSpec, topology: ClusterTopology, seed) -> BlockPlacement:
    """Place the job's blocks on ``replication_factor`` distinct VMs each.

    Replicas land on at least two distinct physical machines whenever the
    cluster and replication factor allow it. The same seed always yields
    the same placement.
    """
    config = topology.config
    r = config.replication_factor
    block_count = job.map_task_count(config.block_size)
    all_vms = sorted(topology.vms)
    if r > len(all_vms):
        raise PlacementError("replication factor exceeds VM count")
    rng = random.Random(f"{seed}")
    replicas: list[tuple[int, ...]] = []
    blocks_by_vm: dict[int, list[int]] = {v: [] for v in all_vms}
    multi_pm = config.physical_machine_count > 1 and r > 1
    for b in range(block_count):
        chosen = [rng.choice(all_vms)]
        if multi_pm:
            first_pm = topology.pm_of(chosen[0])
            other = [v for v in all_vms if topology.pm_of(v) != first_pm]
            chosen.append(rng.choice(other))
        while len(chosen) < r:
            rest = [v for v in all_vms if v not in chosen]
            chosen.append(rng.choice(rest))
        replicas.append(tuple(chosen))
        for v in chosen:
            blocks_by_vm[v].append(b)
    return BlockPlacement(job_id=job.job_id, replicas=replicas, blocks_by_vm=blocks_by_vm)


TASK_PHASES = ("unstarted", "deferred", "running", "done")

_PHASE_TRANSITIONS = {
    ("unstarted", "deferred"),
    ("unstarted", "running"),
    ("deferred", "running"),
    ("deferred", "unstarted"),  # giving up on a parked task
    ("running", "done"),
}


class JobState:
    """Mutable progress bookkeeping for one registered job.

    Every task is in exactly one phase: unstarted, deferred (parked on a
    data-holding VM, waiting for a core move), running, or done. Deferred
    tasks count as scheduled but no slot holds them yet. All transitions
    go through :meth:`set_phase`, which keeps per-phase counters so the
    scheduler's availability checks stay O(1).
    """

    def __init__(self, spec: JobSpec, map_task_count: int):
        if map_task_count < 1:
            raise ContractViolation("a job needs at least one map task")
        self.spec = spec
        self.map_ids = [f"{spec.job_id}/m{i}" for i in range(map_task_count)]
        self.reduce_ids = [f"{spec.job_id}/r{i}" for i in range(spec.reduce_task_count)]
        self._map_id_set = frozenset(self.map_ids)
        self.phase: dict[str, str] = {t: "unstarted" for t in self.map_ids}
        self.phase.update({t: "unstarted" for t in self.reduce_ids})
        self.counts = {
            "map": {p: 0 for p in TASK_PHASES},
            "reduce": {p: 0 for p in TASK_PHASES},
        }
        self.counts["map"]["unstarted"] = map_task_count
        self.counts["reduce"]["unstarted"] = spec.reduce_task_count
        self.running: dict[str, TaskState] = {}
        self.completed_records: list = []  # estimator.TaskRecord instances
        self.current_demand = None  # estimator.SlotDemand once bootstrapped
        self.shuffle_ready_time: float | None = None  # set when the map phase ends

    def kind_of(self, task_id: str) -> str:
        return "map" if task_id in self._map_id_set else "reduce"

    def set_phase(self, task_id: str, new_phase: str) -> None:
        old_phase = self.phase[task_id]
        if (old_phase, new_phase) not in _PHASE_TRANSITIONS:
            raise ContractViolation(
                f"task {task_id} cannot move {old_phase} -> {new_phase}"
            )
        kind = self.kind_of(task_id)
        self.counts[kind][old_phase] -= 1
        self.counts[kind][new_phase] += 1
        self.phase[task_id] = new_phase

    @property
    def map_task_count(self) -> int:
        return len(self.map_ids)

    @property
    def reduce_task_count(self) -> int:
        return len(self.reduce_ids)

    @property
    def total_tasks(self) -> int:
        return len(self.map_ids) + len(self.reduce_ids)

    @property
    def completed_map_count(self) -> int:
        return self.counts["map"]["done"]

    @property
    def completed_reduce_count(self) -> int:
        return self.counts["reduce"]["done"]

    @property
    def scheduled_map_count(self) -> int:
        """Map tasks holding a slot or promised one: running plus deferred."""
        return self.counts["map"]["running"] + self.counts["map"]["deferred"]

    @property
    def scheduled_reduce_count(self) -> int:
        return self.counts["reduce"]["running"] + self.counts["reduce"]["deferred"]

    def has_unassigned_map(self) -> bool:
        return self.counts["map"]["unstarted"] > 0

    def has_unstarted_reduce(self) -> bool:
        return self.counts["reduce"]["unstarted"] > 0

    @property
    def map_finished(self) -> bool:
        return self.completed_map_count == self.map_task_count

    @property
    def completed_map_tasks(self) -> list:
        return [r for r in self.completed_records if r.kind == "map"]

    @property
    def running_tasks(self) -> dict[str, TaskState]:
        return self.running

    @property
    def unstarted_tasks(self) -> list[str]:
        return [t for t, p in self.phase.items() if p in ("unstarted", "deferred")]

    @property
    def remaining_map_count(self) -> int:
        return self.map_task_count - self.completed_map_count

    @property
    def remaining_reduce_count(self) -> int:
        return self.reduce_task_count - self.completed_reduce_count

    @property
    def is_complete(self) -> bool:
        return (
            self.completed_map_count == self.map_task_count
            and self.completed_reduce_count == self.reduce_task_count
        )

    @property
    def in_bootstrap(self) -> bool:
        """No finished task yet, so no timing statistics exist."""
        return not self.completed_records

    def check_partition(self) -> None:
        recount = {
            "map": {p: 0 for p in TASK_PHASES},
            "reduce": {p: 0 for p in TASK_PHASES},
        }
        for task_id, phase in self.phase.items():
            recount[self.kind_of(task_id)][phase] += 1
        if recount != self.counts:
            raise ContractViolation(
                f"job {self.spec.job_id} phase counters disagree with phases"
            )
        if len(self.running) != self.counts["map"]["running"] + self.counts["reduce"]["running"]:
            raise ContractViolation(
                f"job {self.spec.job_id} running set disagrees with phase counts"
            )
