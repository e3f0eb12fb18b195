"""Job-ordering policies: deadline-driven, fair share, and FIFO.

A policy answers two questions at every scheduling opportunity: in what
order should jobs be offered the free slot, and is a given job allowed
to take one more task of a given kind right now. The simulation engine
owns everything else (slots, cores, launching, deferral).

The deadline policy admits each job only up to its current slot demand,
so jobs on track to meet their deadlines leave the rest of the cluster
idle for others. The two baselines are work-conserving: they launch
whenever a slot and a task exist, and they never reconfigure cores.
"""

from __future__ import annotations

from .errors import ConfigError


class DeadlineScheduler:
    """Earliest-deadline-first with demand caps from the slot estimator.

    Jobs sort into three bands. New jobs with no finished task yet come
    first (nothing is known about them, and nothing will be until they
    run something); among them, ones with nothing scheduled precede the
    rest. Jobs still able to meet their deadline follow, earliest
    absolute deadline first. Jobs already late or infeasible come last,
    also by deadline, and run at maximum parallelism with whatever is
    left over.
    """

    name = "ct"
    uses_reconfiguration = True

    @staticmethod
    def _is_late(job, now: float) -> bool:
        if now > job.spec.absolute_deadline:
            return True
        demand = job.state.current_demand
        return demand is not None and not demand.feasible

    def _priority(self, job, now: float):
        if job.state.in_bootstrap:
            starving = 0 if job.state.scheduled_map_count == 0 else 1
            return (0, starving, job.spec.submit_time, job.job_id)
        band = 2 if self._is_late(job, now) else 1
        return (band, job.spec.absolute_deadline, job.spec.submit_time, job.job_id)

    def map_order(self, jobs, now: float, total_map_slots: int):
        return sorted(jobs, key=lambda j: self._priority(j, now))

    def reduce_order(self, jobs, now: float, total_reduce_slots: int):
        return sorted(jobs, key=lambda j: self._priority(j, now))

    def map_cap(self, job, now: float, total_map_slots: int) -> int:
        state = job.state
        if state.in_bootstrap:
            # One full wave: enough to learn timings without estimates.
            return min(state.map_task_count, total_map_slots)
        if self._is_late(job, now) or state.current_demand is None:
            return state.remaining_map_count
        return state.current_demand.map_slots

    def reduce_cap(self, job, now: float) -> int:
        state = job.state
        if self._is_late(job, now) or state.current_demand is None:
            return state.remaining_reduce_count
        return state.current_demand.reduce_slots

    def map_eligible(self, job, now: float, total_map_slots: int) -> bool:
        state = job.state
        if not state.has_unassigned_map():
            return False
        return state.scheduled_map_count < self.map_cap(job, now, total_map_slots)

    def reduce_eligible(self, job, now: float, total_reduce_slots: int) -> bool:
        state = job.state
        if not state.map_finished or not state.has_unstarted_reduce():
            return False
        if not job.reduce_ready(now):
            return False
        return state.scheduled_reduce_count < self.reduce_cap(job, now)


class FifoScheduler:
    """First submitted, first served; no caps, no reconfiguration."""

    name = "fifo"
    uses_reconfiguration = False

    @staticmethod
    def _priority(job):
        return (job.spec.submit_time, job.job_id)

    def map_order(self, jobs, now: float, total_map_slots: int):
        return sorted(jobs, key=self._priority)

    def reduce_order(self, jobs, now: float, total_reduce_slots: int):
        return sorted(jobs, key=self._priority)

    def map_eligible(self, job, now: float, total_map_slots: int) -> bool:
        return job.state.has_unassigned_map()

    def reduce_eligible(self, job, now: float, total_reduce_slots: int) -> bool:
        state = job.state
        return state.map_finished and state.has_unstarted_reduce() and job.reduce_ready(now)


class FairScheduler:
    """Max-min fair sharing of slots, one kind at a time.

    Every assignment goes to the job furthest below the equal share of
    the moment, which is the one using the fewest slots of that kind.
    The share itself never needs computing: with a common target, the
    largest deficit is simply the smallest usage. Work-conserving, so
    leftover slots flow to whoever still has tasks.
    """

    name = "fair"
    uses_reconfiguration = False

    def map_order(self, jobs, now: float, total_map_slots: int):
        return sorted(
            jobs,
            key=lambda j: (j.state.scheduled_map_count, j.spec.submit_time, j.job_id),
        )

    def reduce_order(self, jobs, now: float, total_reduce_slots: int):
        return sorted(
            jobs,
            key=lambda j: (j.state.scheduled_reduce_count, j.spec.submit_time, j.job_id),
        )

    def map_eligible(self, job, now: float, total_map_slots: int) -> bool:
        return job.state.has_unassigned_map()

    def reduce_eligible(self, job, now: float, total_reduce_slots: int) -> bool:
        state = job.state
        return state.map_finished and state.has_unstarted_reduce() and job.reduce_ready(now)


SCHEDULERS = {
    "ct": DeadlineScheduler,
    "fair": FairScheduler,
    "fifo": FifoScheduler,
}


def make_scheduler(name: str):
    try:
        return SCHEDULERS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown scheduler {name!r}; choose from {', '.join(sorted(SCHEDULERS))}"
        ) from None
