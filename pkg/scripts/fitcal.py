"""Fit sweep deadlines against the fair baseline's completion matrix.

Dev-only calibration helper: runs the fair scheduler once per seed (its
completions ignore deadlines), least-squares fits each type's deadline
line D(s) = a*s + c to alpha * fair_mean(s), translates (a, c) back into
SweepTuning knobs, then evaluates the contended-sweep health checks for
a small grid of alpha choices.
"""

from __future__ import annotations

import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import product

sys.path.insert(0, "src")

from vmrsim.engine import SimulationParams, run_simulation  # noqa: E402
from vmrsim.metrics import build_report  # noqa: E402
from vmrsim.workload import (  # noqa: E402
    DEFAULT_PROFILES,
    JOB_TYPES,
    SWEEP_SIZES_GB,
    SweepTuning,
    synth_workload,
)

SEEDS = range(5)
TIGHT = ("Grep", "WordCount", "InvertedIndex", "Sort")
RATIO = {t: DEFAULT_PROFILES[t].intermediate_ratio for t in JOB_TYPES}
WORK_PER_GB = 16 * 20.0 + 20.0  # map slot-work + one reduce per GiB
SHUFFLE_PER_GB = 10.24  # seconds per intermediate-ratio unit per GiB


def fair_reports():
    out = []
    for seed in SEEDS:
        jobs = synth_workload("paper-sweep", seed=seed)
        out.append(build_report(run_simulation(
            jobs, params=SimulationParams(scheduler="fair", seed=seed))))
    return out


def fair_matrix(reports):
    acc = {}
    for rep in reports:
        for row in rep.jobs:
            acc.setdefault((row.job_type, row.input_bytes >> 30), []).append(row.turnaround)
    return {k: sum(v) / len(v) for k, v in acc.items()}


def ls_fit(ys):
    """Least-squares line through (SWEEP_SIZES_GB, ys) -> (slope, intercept)."""
    xs = SWEEP_SIZES_GB
    xbar = sum(xs) / len(xs)
    ybar = sum(ys) / len(ys)
    sxy = sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
    sxx = sum((x - xbar) ** 2 for x in xs)
    slope = sxy / sxx
    return slope, ybar - slope * xbar


def knobs_for(fmeans, alpha_tight, pg_span):
    """Translate fitted lines into SweepTuning dicts (premium fixed at 1).

    Tight types aim at alpha_tight * fair; the shuffle-heavy type gets an
    explicit deadline line from pg_span = (deadline at 2 GiB, at 10 GiB),
    keeping every size's feasibility horizon past the tight clear-out.
    """
    targets, slacks = {}, {}
    for jt in JOB_TYPES:
        if jt == "PermutationGenerator":
            lo, hi = pg_span
            ys = [lo + (hi - lo) * (s - 2) / 8 for s in SWEEP_SIZES_GB]
        else:
            ys = [alpha_tight * fmeans[(jt, s)] for s in SWEEP_SIZES_GB]
        slope, intercept = ls_fit(ys)
        targets[jt] = round(WORK_PER_GB / (slope - RATIO[jt] * SHUFFLE_PER_GB), 2)
        slacks[jt] = round(intercept, 1)
    return SweepTuning(shuffle_premium=1.0, flat_slack=slacks,
                       parallelism_target=targets, submit_round_gap=0.0)


def eval_cell(args):
    alpha_tight, pg_span, fair_blob = args
    fmeans, fair_th, fair_loc = fair_blob
    tuning = knobs_for(fmeans, alpha_tight, pg_span)

    gains, loc_ok, fb_ok, misses = [], 0, 0, 0
    ct_means = {}
    for seed in SEEDS:
        jobs = synth_workload("paper-sweep", seed=seed, tuning=tuning)
        rep = build_report(run_simulation(
            jobs, params=SimulationParams(scheduler="ct", seed=seed)))
        agg = rep.aggregates
        gains.append((agg.throughput / fair_th[seed] - 1.0) * 100.0)
        loc_ok += agg.map_locality_rate >= fair_loc[seed]
        fb_ok += (agg.fallback_fraction < 0.05
                  and agg.remote_map_launches <= agg.fallback_launches)
        misses += agg.deadline_misses
        for row in rep.jobs:
            ct_means.setdefault((row.job_type, row.input_bytes >> 30), []).append(row.turnaround)
    cmeans = {k: sum(v) / len(v) for k, v in ct_means.items()}

    pos = sum(g > 0 for g in gains)
    mean_gain = sum(gains) / len(gains)
    c5 = loc_ok == 5 and fb_ok == 5
    c6 = pos >= 4 and 3.0 <= mean_gain <= 30.0
    mono = all(
        cmeans[(jt, SWEEP_SIZES_GB[i + 1])] >= cmeans[(jt, SWEEP_SIZES_GB[i])]
        for jt in JOB_TYPES for i in range(len(SWEEP_SIZES_GB) - 1))
    pg_top = all(
        cmeans[("PermutationGenerator", s)] >= max(cmeans[(jt, s)] for jt in JOB_TYPES)
        for s in SWEEP_SIZES_GB)
    c7 = mono and pg_top
    gaps = {}
    for jt in JOB_TYPES:
        cm = sum(cmeans[(jt, s)] for s in SWEEP_SIZES_GB) / 5
        fm = sum(fmeans[(jt, s)] for s in SWEEP_SIZES_GB) / 5
        gaps[jt] = abs(cm - fm) / fm * 100.0
    pg_gap = gaps["PermutationGenerator"]
    c8 = all(pg_gap < gaps[jt] for jt in TIGHT)
    gap_str = " ".join(f"{jt[:2]}={gaps[jt]:.1f}" for jt in JOB_TYPES)
    return (alpha_tight, pg_span, mean_gain, pos, misses, c5, c6, c7, c8, gap_str)


def main():
    reports = fair_reports()
    fmeans = fair_matrix(reports)
    fair_th = [r.aggregates.throughput for r in reports]
    fair_loc = [r.aggregates.map_locality_rate for r in reports]
    blob = (fmeans, fair_th, fair_loc)

    grid = list(product(
        (0.50, 0.55, 0.60),
        ((520, 890), (540, 905), (560, 925)),
    ))
    rows = []
    with ProcessPoolExecutor(max_workers=9) as pool:
        for row in pool.map(eval_cell, [(at, span, blob) for at, span in grid]):
            rows.append(row)
    rows.sort(key=lambda r: (-(r[5] and r[6] and r[7] and r[8]), -r[2]))
    print(f"{'aT':>5} {'pgspan':>10} {'gain%':>7} {'pos':>3} {'miss':>4}  c5 c6 c7 c8  gaps")
    for at, span, g, pos, miss, c5, c6, c7, c8, gap_str in rows:
        flags = " ".join("Y" if c else "." for c in (c5, c6, c7, c8))
        print(f"{at:>5} {str(span):>10} {g:>7.2f} {pos:>3} {miss:>4}  {flags}  {gap_str}")


if __name__ == "__main__":
    main()
