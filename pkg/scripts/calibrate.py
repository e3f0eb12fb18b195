"""Grid-search sweep tuning constants against the comparison targets.

Development tool, not shipped with the package: runs the contended sweep
under ct and fair across seeds for each candidate tuning and reports which
calibration targets hold (locality superiority, throughput-gain band,
completion-vs-size trends, smallest relative gap for the shuffle-heaviest
type).
"""

import itertools
import sys
from concurrent.futures import ProcessPoolExecutor

sys.path.insert(0, "src")

from vmrsim.engine import SimulationParams, run_simulation  # noqa: E402
from vmrsim.metrics import build_report  # noqa: E402
from vmrsim.workload import JOB_TYPES, SweepTuning, synth_workload  # noqa: E402

SEEDS = range(5)
PG = "PermutationGenerator"
TIGHT = ("Grep", "WordCount", "InvertedIndex")


def evaluate(spec):
    t_tight, slack_tight, t_sort, prem_pg, t_pg, slack_pg = spec
    tuning = SweepTuning(
        shuffle_premium={
            "Grep": 1.05, "WordCount": 1.05, "InvertedIndex": 1.05,
            "Sort": 1.05, PG: prem_pg,
        },
        flat_slack={
            "Grep": slack_tight, "WordCount": slack_tight,
            "InvertedIndex": slack_tight, "Sort": slack_tight, PG: slack_pg,
        },
        parallelism_target={
            "Grep": t_tight, "WordCount": t_tight, "InvertedIndex": t_tight,
            "Sort": t_sort, PG: t_pg,
        },
    )
    gains = []
    locality_ok = True
    fallback_ok = True
    ct_misses = 0
    samples = {}  # (sched, type, size) -> [turnaround per seed]
    for seed in SEEDS:
        jobs = synth_workload("paper-sweep", seed=seed, tuning=tuning)
        reports = {}
        for sched in ("ct", "fair"):
            result = run_simulation(
                jobs, params=SimulationParams(scheduler=sched, seed=seed)
            )
            report = build_report(result)
            reports[sched] = report
            for row in report.jobs:
                samples.setdefault(
                    (sched, row.job_type, row.input_bytes), []
                ).append(row.turnaround)
        ct, fair = reports["ct"].aggregates, reports["fair"].aggregates
        gains.append((ct.throughput / fair.throughput - 1) * 100)
        ct_misses += ct.deadline_misses
        locality_ok &= ct.map_locality_rate >= fair.map_locality_rate
        fallback_ok &= (
            ct.fallback_fraction < 0.05
            and ct.remote_map_launches <= ct.fallback_launches
        )
    means = {key: sum(vals) / len(vals) for key, vals in samples.items()}
    sizes = sorted({size for (_, _, size) in means})

    mean_gain = sum(gains) / len(gains)
    positives = sum(g > 0 for g in gains)
    c6 = positives >= 4 and 3.0 <= mean_gain <= 30.0

    c7 = True
    for sched in ("ct", "fair"):
        for jt in JOB_TYPES:
            seq = [means[(sched, jt, s)] for s in sizes]
            if any(later < earlier for earlier, later in zip(seq, seq[1:])):
                c7 = False
        for s in sizes:
            top = means[(sched, PG, s)]
            if any(
                means[(sched, jt, s)] > top for jt in JOB_TYPES if jt != PG
            ):
                c7 = False

    rel_gap = {}
    for jt in JOB_TYPES:
        mean_ct = sum(means[("ct", jt, s)] for s in sizes) / len(sizes)
        mean_fair = sum(means[("fair", jt, s)] for s in sizes) / len(sizes)
        rel_gap[jt] = abs((mean_ct - mean_fair) / mean_fair)
    c8 = all(rel_gap[PG] < rel_gap[jt] for jt in JOB_TYPES if jt != PG)

    return spec, {
        "gain": mean_gain,
        "pos": positives,
        "c5": locality_ok and fallback_ok,
        "c6": c6,
        "c7": c7,
        "c8": c8,
        "gaps": rel_gap,
        "gains": gains,
        "misses": ct_misses,
    }


def main() -> None:
    grid = list(itertools.product(
        (8.0, 12.0, 16.0),      # parallelism target: Grep/WordCount/InvertedIndex
        (40.0, 70.0),           # flat slack for the tight types (and Sort)
        (8.0,),                 # Sort parallelism target
        (1.0, 1.3),             # PG shuffle premium
        (8.0, 12.0),            # PG parallelism target
        (150.0, 250.0),         # PG flat slack
    ))
    print(f"evaluating {len(grid)} configurations x {len(SEEDS)} seeds x 2 schedulers")
    with ProcessPoolExecutor(max_workers=10) as pool:
        outcomes = list(pool.map(evaluate, grid))

    outcomes.sort(
        key=lambda item: (
            item[1]["c5"] + item[1]["c6"] + item[1]["c7"] + item[1]["c8"],
            item[1]["pos"],
            -abs(item[1]["gain"] - 12.0),
        ),
        reverse=True,
    )
    print(
        f"{'Tt':>5}{'slk':>5}{'Ts':>4}{'pPG':>5}{'TPG':>5}{'sPG':>5}"
        f"{'gain%':>8}{'pos':>4}{'miss':>5}  c5 c6 c7 c8  gaps"
    )
    for (tt, slk, ts, ppg, tpg, spg), r in outcomes:
        flags = "  ".join("Y" if r[c] else "." for c in ("c5", "c6", "c7", "c8"))
        gap_text = " ".join(
            f"{jt[:2]}={r['gaps'][jt] * 100:.1f}" for jt in JOB_TYPES
        )
        print(
            f"{tt:>5.0f}{slk:>5.0f}{ts:>4.0f}{ppg:>5.1f}{tpg:>5.0f}{spg:>5.0f}"
            f"{r['gain']:>8.2f}{r['pos']:>4}{r['misses']:>5}  {flags}  {gap_text}"
        )


if __name__ == "__main__":
    main()
