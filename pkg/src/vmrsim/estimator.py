"""Slot-demand estimation from observed task times and a deadline.

A job's remaining work is modeled as three serial phases: a map phase of
``map_task_count`` tasks averaging ``mean_map_time`` each, a serialized
shuffle that copies one unit per (map, reduce) pair, and a reduce phase.
Given the time left before the deadline, the minimum numbers of map and
reduce slots that still fit are the closed-form minimizers of
``map_slots + reduce_slots`` subject to

    map_work / map_slots + reduce_work / reduce_slots <= budget

where ``budget`` is the remaining deadline minus the shuffle time. Both
continuous minimizers scale with the square roots of the phase works and
are rounded up to integers, which keeps the fit property intact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import ContractViolation, DivisionByZeroDemand, NoCompletedTasks


@dataclass(frozen=True)
class TaskRecord:
    """One finished task as seen by the estimator."""

    task_id: str
    kind: str  # "map" or "reduce"
    duration: float
    vm_id: int = -1
    local: bool = True

    def __post_init__(self):
        if self.duration <= 0:
            raise ContractViolation("task duration must be positive")
        if self.kind not in ("map", "reduce"):
            raise ContractViolation("task kind must be map or reduce")


@dataclass(frozen=True)
class JobTimingModel:
    """Timing statistics and task counts feeding one estimate.

    ``shuffle_total`` overrides the computed shuffle length. The override
    matters for remaining-work models: the serialized copy depends on all
    map tasks, not just unfinished ones, so a model over remaining tasks
    must carry the full (or remaining wall-clock) shuffle explicitly.
    """

    map_task_count: int
    reduce_task_count: int
    mean_map_time: float
    shuffle_copy_time: float  # seconds per (map, reduce) pair
    mean_reduce_time: float | None = None  # defaults to mean_map_time
    shuffle_total: float | None = None  # defaults to pairs * copy time

    def __post_init__(self):
        if self.map_task_count < 0 or self.reduce_task_count < 0:
            raise ContractViolation("task counts cannot be negative")
        if self.mean_map_time < 0:
            raise ContractViolation("mean map time cannot be negative")
        if self.shuffle_copy_time < 0:
            raise ContractViolation("shuffle copy time cannot be negative")
        if self.mean_reduce_time is not None and self.mean_reduce_time < 0:
            raise ContractViolation("mean reduce time cannot be negative")
        if self.shuffle_total is not None and self.shuffle_total < 0:
            raise ContractViolation("shuffle total cannot be negative")

    @property
    def reduce_time(self) -> float:
        """Reduce tasks are assumed as long as map tasks unless measured."""
        return self.mean_map_time if self.mean_reduce_time is None else self.mean_reduce_time

    @property
    def map_work(self) -> float:
        return self.map_task_count * self.mean_map_time

    @property
    def reduce_work(self) -> float:
        return self.reduce_task_count * self.reduce_time

    @property
    def shuffle_duration(self) -> float:
        if self.shuffle_total is not None:
            return self.shuffle_total
        return self.map_task_count * self.reduce_task_count * self.shuffle_copy_time


@dataclass(frozen=True)
class SlotDemand:
    """Minimum concurrent slots that still meet the deadline."""

    map_slots: int
    reduce_slots: int
    feasible: bool
    continuous_map: float
    continuous_reduce: float


def mean_map_task_time(completed: Iterable) -> float:
    """Mean duration over completed map tasks; the core statistic."""
    durations = [r.duration for r in completed if r.kind == "map"]
    if not durations:
        raise NoCompletedTasks("no completed map task to average")
    return sum(durations) / len(durations)


def phase_durations(model: JobTimingModel, demand: SlotDemand) -> tuple[float, float, float]:
    """(map, shuffle, reduce) phase lengths under the given parallelism."""
    if model.map_task_count > 0:
        if demand.map_slots < 1:
            raise DivisionByZeroDemand("map phase has tasks but zero slots")
        map_phase = model.map_work / demand.map_slots
    else:
        map_phase = 0.0
    if model.reduce_task_count > 0:
        if demand.reduce_slots < 1:
            raise DivisionByZeroDemand("reduce phase has tasks but zero slots")
        reduce_phase = model.reduce_work / demand.reduce_slots
    else:
        reduce_phase = 0.0
    return map_phase, model.shuffle_duration, reduce_phase


def estimate_completion_time(model: JobTimingModel, demand: SlotDemand) -> float:
    """Total serial time of the three phases under the given demand."""
    map_phase, shuffle, reduce_phase = phase_durations(model, demand)
    return map_phase + shuffle + reduce_phase


def min_slots(model: JobTimingModel, remaining_deadline: float) -> SlotDemand:
    """Smallest (map, reduce) slot pair whose phases fit the deadline.

    Infeasible when the shuffle alone exceeds the remaining deadline; the
    returned demand then asks for maximum parallelism so callers can run
    the job best-effort. Positive task counts with a zero mean time have
    no meaningful demand and are rejected.
    """
    if remaining_deadline <= 0:
        raise ContractViolation("remaining deadline must be positive")
    map_work = model.map_work
    reduce_work = model.reduce_work
    if model.map_task_count > 0 and model.mean_map_time <= 0:
        raise ContractViolation("map tasks present but mean map time is zero")
    if model.reduce_task_count > 0 and model.reduce_time <= 0:
        raise ContractViolation("reduce tasks present but reduce time is zero")

    budget = remaining_deadline - model.shuffle_duration
    if budget <= 0:
        return SlotDemand(
            map_slots=model.map_task_count,
            reduce_slots=model.reduce_task_count,
            feasible=False,
            continuous_map=float(model.map_task_count),
            continuous_reduce=float(model.reduce_task_count),
        )

    if map_work == 0 and reduce_work == 0:
        return SlotDemand(0, 0, True, 0.0, 0.0)
    if reduce_work == 0:
        cont = map_work / budget
        return SlotDemand(math.ceil(cont), 0, True, cont, 0.0)
    if map_work == 0:
        cont = reduce_work / budget
        return SlotDemand(0, math.ceil(cont), True, 0.0, cont)

    root_m = math.sqrt(map_work)
    root_r = math.sqrt(reduce_work)
    cont_map = root_m * (root_m + root_r) / budget
    cont_reduce = root_r * (root_m + root_r) / budget
    return SlotDemand(
        map_slots=math.ceil(cont_map),
        reduce_slots=math.ceil(cont_reduce),
        feasible=True,
        continuous_map=cont_map,
        continuous_reduce=cont_reduce,
    )


def remaining_shuffle(job, shuffle_copy_time: float, now: float) -> float:
    """How much of the serialized copy still lies ahead at ``now``.

    While any map task is unfinished, the whole shuffle is still pending:
    the copy serializes over every (map, reduce) pair, including pairs
    whose map already finished. Once the map phase is done the remaining
    part is just the wall-clock distance to the copy's end, which callers
    record as ``shuffle_ready_time`` on the job.
    """
    if job.remaining_reduce_count == 0:
        return 0.0
    if not job.map_finished:
        return job.map_task_count * job.remaining_reduce_count * shuffle_copy_time
    ready = getattr(job, "shuffle_ready_time", None)
    if ready is None:
        return 0.0
    return max(0.0, ready - now)


def remaining_model(job, shuffle_copy_time: float, now: float) -> JobTimingModel:
    """Timing model over a job's not-yet-completed tasks."""
    return JobTimingModel(
        map_task_count=job.remaining_map_count,
        reduce_task_count=job.remaining_reduce_count,
        mean_map_time=mean_map_task_time(job.completed_records),
        shuffle_copy_time=shuffle_copy_time,
        shuffle_total=remaining_shuffle(job, shuffle_copy_time, now),
    )


def recompute_demand(job, model: JobTimingModel, now: float) -> SlotDemand:
    """Refresh a job's demand from its enlarged completion history.

    Statistics are rebuilt from the completed map tasks, the deadline is
    re-expressed as time remaining from ``now``, and the slot minimum is
    taken over the tasks that have not finished yet. A job past its
    deadline degrades to maximum parallelism, marked infeasible.
    """
    fresh = remaining_model(job, model.shuffle_copy_time, now)
    remaining_deadline = job.spec.absolute_deadline - now
    if remaining_deadline <= 0:
        return SlotDemand(
            map_slots=fresh.map_task_count,
            reduce_slots=fresh.reduce_task_count,
            feasible=False,
            continuous_map=float(fresh.map_task_count),
            continuous_reduce=float(fresh.reduce_task_count),
        )
    return min_slots(fresh, remaining_deadline)
