"""Package acceptance suite.

End-to-end checks of the simulator's headline guarantees: estimator
optimality against a brute-force oracle, the deadline guarantee in the
model-exact regime, core conservation under reconfiguration, locality
and throughput superiority of the deadline scheduler over the fair
baseline, completion-time trends across job types and sizes, bytewise
determinism with trace replay, invariant cleanliness, and heartbeat
cadence. Everything runs through public interfaces only.
"""

import math
import random
import time

import pytest

from oracles import brute_force_min_sum, continuous_optimum_sum, fits
from vmrsim.cluster import BlockPlacement, ClusterConfig, GiB, MiB, JobSpec
from vmrsim.engine import TICKS_PER_SECOND, SimulationParams, run_simulation
from vmrsim.estimator import (
    JobTimingModel,
    estimate_completion_time,
    min_slots,
)
from vmrsim.metrics import build_report, check_replay, compare
from vmrsim.workload import WorkloadProfile, synth_workload

SEEDS = (0, 1, 2, 3, 4)
SIZES_GB = (2, 4, 6, 8, 10)
JOB_TYPES = ("Grep", "WordCount", "InvertedIndex", "Sort",
             "PermutationGenerator")
SHUFFLE_HEAVY = "PermutationGenerator"
HEARTBEAT = 3.0
BLOCK = 64 * MiB
DEFAULT_CONFIG = ClusterConfig()


@pytest.fixture(scope="module")
def sweep_runs():
    """(scheduler, seed) -> (SimResult, SimReport) over the 5-seed sweep."""
    runs = {}
    for scheduler in ("ct", "fair"):
        for seed in SEEDS:
            result = run_simulation(
                synth_workload("paper-sweep", seed=seed),
                params=SimulationParams(
                    scheduler=scheduler, seed=seed, keep_trace=True),
            )
            runs[scheduler, seed] = (result, build_report(result))
    return runs


def mean(values):
    values = list(values)
    return sum(values) / len(values)


def completion_matrix(runs, scheduler):
    """(job_type, size_gb) -> mean turnaround across seeds."""
    sums: dict[tuple, list] = {}
    for seed in SEEDS:
        _, report = runs[scheduler, seed]
        for row in report.jobs:
            size_gb = round(row.input_bytes / GiB)
            sums.setdefault((row.job_type, size_gb), []).append(row.turnaround)
    return {key: mean(vals) for key, vals in sums.items()}


# ---------------------------------------------------------------------------
# Estimator vs oracle
# ---------------------------------------------------------------------------


class TestSlotEstimator:
    def test_matches_brute_force_on_200_random_instances(self):
        rng = random.Random("acceptance/estimator-oracle")
        started = time.perf_counter()
        feasible_count = infeasible_count = 0
        for _ in range(200):
            map_count = rng.randint(1, 500)
            reduce_count = rng.randint(0, 50)
            map_time = rng.uniform(1.0, 120.0)
            copy_time = rng.uniform(0.01, 2.0)
            model = JobTimingModel(
                map_task_count=map_count,
                reduce_task_count=reduce_count,
                mean_map_time=map_time,
                shuffle_copy_time=copy_time,
            )
            shuffle = model.shuffle_duration
            if shuffle > 0 and rng.random() < 0.3:
                deadline = shuffle * rng.uniform(0.05, 0.95)
            else:
                deadline = shuffle + (
                    (model.map_work + model.reduce_work)
                    / rng.uniform(0.5, 40.0)
                )
            demand = min_slots(model, deadline)
            budget = deadline - shuffle
            if budget <= 0:
                # Infeasibility is reported exactly when the copy alone
                # exceeds the budget; the demand degrades to one slot
                # per task so callers can still run flat out.
                infeasible_count += 1
                assert demand.feasible is False
                assert demand.map_slots == map_count
                assert demand.reduce_slots == reduce_count
                continue
            feasible_count += 1
            assert demand.feasible is True
            assert fits(model.map_work, model.reduce_work,
                        demand.map_slots, demand.reduce_slots, budget)
            limit = math.ceil(continuous_optimum_sum(
                model.map_work, model.reduce_work, budget)) + 4
            best = brute_force_min_sum(
                model.map_work, model.reduce_work, budget, limit)
            assert best is not None
            assert demand.map_slots + demand.reduce_slots <= best + 2
        assert feasible_count + infeasible_count == 200
        assert feasible_count >= 100 and infeasible_count >= 20
        assert time.perf_counter() - started < 5.0

    def test_reference_instance_exact_values(self):
        # 50 maps x 20 s and 10 reduces x 20 s with an 80 s serialized
        # copy against a 330 s budget: the continuous optimum, its
        # integerization, and the resulting completion estimate are all
        # pinned to hand-computed values.
        model = JobTimingModel(
            map_task_count=50,
            reduce_task_count=10,
            mean_map_time=20.0,
            shuffle_copy_time=0.16,
        )
        assert model.shuffle_duration == pytest.approx(80.0)
        demand = min_slots(model, 330.0)
        assert demand.feasible is True
        assert demand.continuous_map == pytest.approx(5.79, abs=0.01)
        assert demand.continuous_reduce == pytest.approx(2.59, abs=0.01)
        assert (demand.map_slots, demand.reduce_slots) == (6, 3)
        estimate = estimate_completion_time(model, demand)
        assert estimate == pytest.approx(1000 / 6 + 80.0 + 200 / 3)
        assert estimate == pytest.approx(313.33, abs=0.01)
        assert estimate <= 330.0


# ---------------------------------------------------------------------------
# Deadline guarantee in the model-exact regime
# ---------------------------------------------------------------------------


def spread_placement(job: JobSpec, vm_count: int) -> BlockPlacement:
    """Single-replica blocks laid round-robin across every VM."""
    count = job.map_task_count(BLOCK)
    replicas = [(i % vm_count,) for i in range(count)]
    by_vm: dict[int, list] = {}
    for block, (vm,) in enumerate(replicas):
        by_vm.setdefault(vm, []).append(block)
    return BlockPlacement(job_id=job.job_id, replicas=replicas,
                          blocks_by_vm=by_vm)


def solo_feasible_cases(count=50):
    """Randomized solo jobs whose timing model is exact.

    The regime: zero jitter, serialized copy, every map launched locally
    in one wave (single-replica blocks spread over more slots than
    tasks), a single reduce wave (slot demand at least the reduce
    count), and a deadline with slack beyond the single-wave schedule.
    Reduce counts pair with map-count floors that keep the computed
    reduce demand at or above the reduce count.
    """
    rng = random.Random("acceptance/deadline-guarantee")
    cases = []
    for index in range(count):
        slack_factor = rng.choice((2, 3, 4, 5))
        reduce_count = rng.choice((1, 2, 3))
        map_floor = {1: 12, 2: 15, 3: 47}[reduce_count]
        map_count = rng.randint(map_floor, 60)
        task_time = rng.uniform(5.0, 50.0)
        ratio = rng.uniform(0.1, 1.5)
        cases.append((index, map_count, reduce_count, slack_factor,
                      task_time, ratio))
    return cases


class TestDeadlineGuarantee:
    def test_solo_feasible_jobs_meet_their_deadlines(self):
        config = DEFAULT_CONFIG
        bandwidth = config.network_bandwidth
        for (index, map_count, reduce_count, slack_factor, task_time,
             ratio) in solo_feasible_cases():
            input_size = map_count * BLOCK
            intermediate = input_size * ratio
            shuffle = intermediate / bandwidth
            deadline = (slack_factor + 1) * task_time + shuffle + 7.0
            spec = JobSpec(
                job_id=f"solo-{index}",
                submit_time=0.0,
                job_type="Synthetic",
                input_size=input_size,
                deadline=deadline,
                reduce_task_count=reduce_count,
            )
            copy_time = intermediate / (map_count * reduce_count * bandwidth)
            model = JobTimingModel(
                map_task_count=map_count,
                reduce_task_count=reduce_count,
                mean_map_time=task_time,
                shuffle_copy_time=copy_time,
            )
            demand = min_slots(model, deadline)
            # Regime preconditions, asserted rather than filtered.
            assert demand.feasible is True
            assert demand.map_slots <= config.total_map_slots
            assert demand.reduce_slots <= config.total_reduce_slots
            assert demand.reduce_slots >= reduce_count
            profile = WorkloadProfile(
                "Synthetic",
                base_map_time_per_block=task_time,
                intermediate_ratio=ratio,
            )
            result = run_simulation(
                [spec],
                config=config,
                params=SimulationParams(
                    scheduler="ct", seed=index, jitter=0.0,
                    shuffle_mode="serial"),
                profiles={"Synthetic": profile},
                placements={spec.job_id: spread_placement(
                    spec, config.vm_count)},
            )
            report = build_report(result)
            row = report.jobs[0]
            estimate = estimate_completion_time(model, demand)
            assert row.deadline_met, f"case {index} missed its deadline"
            assert row.turnaround <= deadline
            assert row.turnaround <= estimate + 2 * HEARTBEAT, (
                f"case {index}: {row.turnaround} vs estimate {estimate}"
            )
            assert report.aggregates.violation_count == 0


# ---------------------------------------------------------------------------
# Core conservation under reconfiguration
# ---------------------------------------------------------------------------


class TestCoreConservation:
    def test_contended_run_conserves_cores_within_machines(self, sweep_runs):
        result, _ = sweep_runs["ct", 0]
        config = DEFAULT_CONFIG
        assert len({row.job for row in result.trace_rows
                    if row.event == "launch"}) == 25
        cores = {vm: config.cores_per_vm_initial
                 for vm in range(config.vm_count)}
        pm_of = lambda vm: vm // config.vms_per_pm
        pending: dict[tuple, list] = {}
        effective_count = 0
        for row in result.trace_rows:
            if row.event == "core_move":
                src = int(row.detail_value("from"))
                dst = int(row.detail_value("to"))
                assert pm_of(src) == pm_of(dst), (
                    f"cross-machine core move {src}->{dst} at {row.time}"
                )
                pending.setdefault((row.job, row.task), []).append((src, dst))
            elif row.event == "reconfig_effective":
                src = int(row.detail_value("from"))
                dst = int(row.detail_value("to"))
                queue = pending.get((row.job, row.task))
                assert queue and queue.pop(0) == (src, dst), (
                    "reconfiguration landed without a matching move decision"
                )
                cores[src] -= 1
                cores[dst] += 1
                assert cores[src] >= 0
                # The audit proper: machine and cluster core sums are
                # unchanged at the instant every reconfiguration lands.
                assert sum(cores.values()) == (
                    config.vm_count * config.cores_per_vm_initial)
                for pm in range(config.physical_machine_count):
                    pm_sum = sum(
                        cores[pm * config.vms_per_pm + k]
                        for k in range(config.vms_per_pm)
                    )
                    assert pm_sum == config.initial_cores_per_pm
                effective_count += 1
        assert effective_count > 0, "run exercised no reconfigurations"
        assert effective_count == result.counters.core_moves


# ---------------------------------------------------------------------------
# Locality and throughput against the fair baseline
# ---------------------------------------------------------------------------


class TestLocalitySuperiority:
    def test_locality_beats_fair_in_every_seed(self, sweep_runs):
        for seed in SEEDS:
            ct_rate = sweep_runs["ct", seed][1].aggregates.map_locality_rate
            fair_rate = (
                sweep_runs["fair", seed][1].aggregates.map_locality_rate)
            assert ct_rate >= fair_rate, f"seed {seed}"

    def test_every_remote_launch_is_a_starvation_fallback(self, sweep_runs):
        for seed in SEEDS:
            result, report = sweep_runs["ct", seed]
            for row in result.trace_rows:
                if row.event != "launch":
                    continue
                if row.detail_value("kind") != "map":
                    continue
                if not row.local:
                    assert row.detail_value("origin") == "fallback", (
                        f"seed {seed}: non-local launch of {row.task} "
                        f"came from {row.detail_value('origin')}"
                    )
            assert report.aggregates.fallback_fraction < 0.05, f"seed {seed}"


class TestThroughputGain:
    def test_gain_over_fair_is_positive_and_plausible(self, sweep_runs):
        gains = []
        for seed in SEEDS:
            comparison = compare(
                sweep_runs["ct", seed][1], sweep_runs["fair", seed][1])
            gains.append(comparison.throughput_gain)
        positive = sum(1 for g in gains if g > 0)
        assert positive >= 4, f"gains {gains}"
        assert 0.03 <= mean(gains) <= 0.30, f"mean gain {mean(gains)}"


# ---------------------------------------------------------------------------
# Completion-time structure across types and sizes
# ---------------------------------------------------------------------------


class TestCompletionTrends:
    @pytest.mark.parametrize("scheduler", ("ct", "fair"))
    def test_mean_completion_never_drops_with_input_size(
            self, sweep_runs, scheduler):
        matrix = completion_matrix(sweep_runs, scheduler)
        for job_type in JOB_TYPES:
            means = [matrix[job_type, size] for size in SIZES_GB]
            for smaller, larger in zip(means, means[1:]):
                assert larger >= smaller, (
                    f"{scheduler}/{job_type}: {means}"
                )

    @pytest.mark.parametrize("scheduler", ("ct", "fair"))
    def test_shuffle_heaviest_type_is_slowest_at_every_size(
            self, sweep_runs, scheduler):
        matrix = completion_matrix(sweep_runs, scheduler)
        for size in SIZES_GB:
            heavy = matrix[SHUFFLE_HEAVY, size]
            for job_type in JOB_TYPES:
                if job_type == SHUFFLE_HEAVY:
                    continue
                assert heavy > matrix[job_type, size], (
                    f"{scheduler}@{size}GB: {SHUFFLE_HEAVY} {heavy} vs "
                    f"{job_type} {matrix[job_type, size]}"
                )

    def test_shuffle_heaviest_type_has_smallest_scheduler_gap(
            self, sweep_runs):
        ct_matrix = completion_matrix(sweep_runs, "ct")
        fair_matrix = completion_matrix(sweep_runs, "fair")
        gaps = {}
        for job_type in JOB_TYPES:
            ct_mean = mean(ct_matrix[job_type, s] for s in SIZES_GB)
            fair_mean = mean(fair_matrix[job_type, s] for s in SIZES_GB)
            gaps[job_type] = abs(ct_mean - fair_mean) / fair_mean
        heavy_gap = gaps.pop(SHUFFLE_HEAVY)
        assert all(heavy_gap < gap for gap in gaps.values()), (
            f"{SHUFFLE_HEAVY} gap {heavy_gap:.4f} vs {gaps}"
        )


# ---------------------------------------------------------------------------
# Determinism, replay, invariants, cadence
# ---------------------------------------------------------------------------


class TestDeterminismAndReplay:
    def test_identical_runs_are_byte_identical(self, sweep_runs):
        for scheduler in ("ct", "fair"):
            first_result, first_report = sweep_runs[scheduler, 0]
            again = run_simulation(
                synth_workload("paper-sweep", seed=0),
                params=SimulationParams(
                    scheduler=scheduler, seed=0, keep_trace=True),
            )
            again_report = build_report(again)
            assert (first_report.to_json_lines()
                    == again_report.to_json_lines())
            assert ([row.to_line() for row in first_result.trace_rows]
                    == [row.to_line() for row in again.trace_rows])

    def test_replay_reproduces_every_aggregate_exactly(self, sweep_runs):
        for (scheduler, seed), (result, report) in sweep_runs.items():
            check_replay(report, result.trace_rows)


class TestInvariantCleanliness:
    def test_no_priority_or_demand_violations_in_any_run(self, sweep_runs):
        for (scheduler, seed), (result, report) in sweep_runs.items():
            assert result.counters.violations == [], f"{scheduler}/{seed}"
            assert report.aggregates.violation_count == 0
            assert all(row.event != "violation"
                       for row in result.trace_rows), f"{scheduler}/{seed}"


class TestHeartbeatCadence:
    def test_heartbeats_are_exactly_spaced_from_stagger_offsets(
            self, sweep_runs):
        result, _ = sweep_runs["ct", 0]
        config = DEFAULT_CONFIG
        beats: dict[int, list] = {}
        for row in result.trace_rows:
            if row.event == "heartbeat":
                beats.setdefault(row.vm, []).append(row.time)
        assert sorted(beats) == list(range(config.vm_count))
        interval_ticks = round(HEARTBEAT * TICKS_PER_SECOND)
        for index, vm_id in enumerate(sorted(beats)):
            times = beats[vm_id]
            stagger = (index * interval_ticks // config.vm_count
                       ) / TICKS_PER_SECOND
            assert times[0] == stagger, f"vm {vm_id} first beat"
            assert len(times) >= 2
            for earlier, later in zip(times, times[1:]):
                assert later - earlier == HEARTBEAT, f"vm {vm_id}"
