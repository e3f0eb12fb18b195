"""Locality-preserving core reconfiguration between co-resident VMs.

A map task whose input lives elsewhere is never executed remotely by the
deadline scheduler. Instead the task is parked on a VM that holds a
replica (an Assign entry on that VM's physical machine) while the idle
slot that triggered the attempt donates its core (a Release entry on its
own machine). Matching the head of a machine's Release queue with the
head of its Assign queue moves one core between two VMs that share that
machine; cores never cross machine boundaries. The parked task starts on
its data-holding VM once the move lands.

A Release entry reserves the donated core. Until it is matched, the
reservation is soft: the owning VM may withdraw it to launch local work,
which is safe because an unmatched entry means no parked task currently
wants that machine's cores. Once matched, the core is hard-reserved
until the move takes effect.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cluster import ClusterTopology, VMState
from .errors import ContractViolation


@dataclass(frozen=True)
class AssignEntry:
    target_vm: int
    task_id: str
    job_id: str
    enqueued_at: float


@dataclass(frozen=True)
class ReleaseEntry:
    vm_id: int
    registered_at: float


@dataclass
class CoreMoveQueues:
    """FIFO Assign and Release queues of one physical machine."""

    pm_id: int
    assign_queue: list[AssignEntry] = field(default_factory=list)
    release_queue: list[ReleaseEntry] = field(default_factory=list)


@dataclass(frozen=True)
class CoreMove:
    """One core migrating between two VMs on the same machine."""

    from_vm: int
    to_vm: int
    task_id: str
    job_id: str
    decided_at: float
    effective_at: float


@dataclass(frozen=True)
class ElidedLaunch:
    """Matched pair where donor and target coincide: no move needed."""

    vm_id: int
    task_id: str
    job_id: str
    decided_at: float


@dataclass(frozen=True)
class LocalLaunch:
    task_id: str
    vm_id: int


@dataclass(frozen=True)
class DeferredLaunch:
    task_id: str
    target_vm: int
    donor_registered: bool


def donation_capacity(vm: VMState) -> int:
    """How many more cores this VM may promise away right now.

    A promise needs a genuinely free core, and a VM never promises its
    way below one core.
    """
    return max(0, min(vm.free_cores(), vm.core_count - vm.reserved_total - 1))


class ReconfigState:
    """All per-machine queues plus reservation bookkeeping."""

    def __init__(self, topology: ClusterTopology):
        self.topology = topology
        self.queues = {
            pm.pm_id: CoreMoveQueues(pm_id=pm.pm_id) for pm in topology.machines
        }

    def queues_of_vm(self, vm_id: int) -> CoreMoveQueues:
        return self.queues[self.topology.pm_of(vm_id)]

    def release_len(self, vm_id: int) -> int:
        return len(self.queues_of_vm(vm_id).release_queue)

    def assign_len(self, vm_id: int) -> int:
        return len(self.queues_of_vm(vm_id).assign_queue)

    def register_release(self, vm: VMState, now: float, max_new: int | None = None) -> int:
        """Promise this VM's idle cores to the machine's Release queue.

        One entry per free core; registration beyond the VM's donation
        capacity is a no-op. Returns how many entries were added.
        """
        room = donation_capacity(vm)
        if max_new is not None:
            room = min(room, max_new)
        queue = self.queues[vm.pm_id].release_queue
        for _ in range(room):
            queue.append(ReleaseEntry(vm_id=vm.vm_id, registered_at=now))
            vm.reserved_pending += 1
        return room

    def withdraw_release(self, vm: VMState) -> bool:
        """Take back this VM's most recent unmatched promise, if any."""
        queue = self.queues[vm.pm_id].release_queue
        for i in range(len(queue) - 1, -1, -1):
            if queue[i].vm_id == vm.vm_id:
                del queue[i]
                vm.reserved_pending -= 1
                return True
        return False

    def enqueue_assign(self, target_vm: int, task_id: str, job_id: str, now: float) -> None:
        queue = self.queues_of_vm(target_vm).assign_queue
        if any(e.task_id == task_id for e in queue):
            raise ContractViolation(f"task {task_id} already queued for assignment")
        queue.append(AssignEntry(target_vm=target_vm, task_id=task_id,
                                 job_id=job_id, enqueued_at=now))

    def purge_assign(self, task_id: str) -> bool:
        """Drop a parked task's Assign entry; Release entries stay valid."""
        for queues in self.queues.values():
            for i, entry in enumerate(queues.assign_queue):
                if entry.task_id == task_id:
                    del queues.assign_queue[i]
                    return True
        return False

    def outstanding_assigns(self) -> int:
        return sum(len(q.assign_queue) for q in self.queues.values())

    def match_and_reconfigure(self, pm_id: int, now: float, latency: float):
        """Pair queue heads FIFO on one machine until either queue drains.

        Returns the decided actions: CoreMove for a real migration,
        ElidedLaunch when a VM's own promised core satisfies its own
        parked task.
        """
        queues = self.queues[pm_id]
        actions = []
        while queues.release_queue and queues.assign_queue:
            release = queues.release_queue.pop(0)
            assign = queues.assign_queue.pop(0)
            donor = self.topology.vms[release.vm_id]
            target = self.topology.vms[assign.target_vm]
            if donor.pm_id != pm_id or target.pm_id != pm_id:
                raise ContractViolation("queue entry leaked across machines")
            if donor.reserved_pending < 1:
                raise ContractViolation(
                    f"vm {donor.vm_id} has a Release entry but no reservation")
            if donor.vm_id == target.vm_id:
                donor.reserved_pending -= 1
                actions.append(ElidedLaunch(
                    vm_id=donor.vm_id, task_id=assign.task_id,
                    job_id=assign.job_id, decided_at=now))
            else:
                donor.reserved_pending -= 1
                donor.reserved_inflight += 1
                actions.append(CoreMove(
                    from_vm=donor.vm_id, to_vm=target.vm_id,
                    task_id=assign.task_id, job_id=assign.job_id,
                    decided_at=now, effective_at=now + latency))
        return actions

    def apply_core_move(self, move: CoreMove) -> None:
        """Land a matched move: one core leaves the donor, joins the target."""
        donor = self.topology.vms[move.from_vm]
        target = self.topology.vms[move.to_vm]
        if donor.pm_id != target.pm_id:
            raise ContractViolation("core moves cannot cross physical machines")
        if donor.reserved_inflight < 1:
            raise ContractViolation(f"vm {donor.vm_id} has no in-flight reservation")
        if donor.core_count < 2:
            raise ContractViolation(f"vm {donor.vm_id} cannot give up its last core")
        donor.reserved_inflight -= 1
        donor.core_count -= 1
        target.core_count += 1
        if donor.core_count < donor.engaged_cores + donor.reserved_total:
            raise ContractViolation(
                f"vm {donor.vm_id} donated a core it was still using")


def select_target_node(replica_vms, state: ReconfigState) -> int:
    """Pick which replica holder should receive a parked task.

    Prefer the VM whose machine has the most pending core donations; if
    no candidate machine has any, prefer the least loaded Assign queue.
    Ties go to the lowest VM id.
    """
    candidates = sorted(replica_vms)
    if not candidates:
        raise ContractViolation("a map task must have at least one replica")
    if any(state.release_len(v) > 0 for v in candidates):
        return min(candidates, key=lambda v: (-state.release_len(v), v))
    return min(candidates, key=lambda v: (state.assign_len(v), v))


def assign_map_task(job_run, node_vm: int, state: ReconfigState, now: float):
    """One map-assignment attempt for a job on a heartbeating node.

    A task whose block lives on the node launches there. Otherwise the
    job's next unassigned task is parked on a chosen replica holder and
    the node donates a core toward the move when it can spare one.
    Returns None when the job has no unassigned map task.
    """
    local_task = job_run.peek_local_unassigned(node_vm)
    if local_task is not None:
        return LocalLaunch(task_id=local_task, vm_id=node_vm)
    task_id = job_run.peek_any_unassigned()
    if task_id is None:
        return None
    replicas = job_run.replica_vms(task_id)
    target = select_target_node(replicas, state)
    state.enqueue_assign(target, task_id, job_run.job_id, now)
    node = state.topology.vms[node_vm]
    donated = state.register_release(node, now, max_new=1) > 0
    return DeferredLaunch(task_id=task_id, target_vm=target, donor_registered=donated)
