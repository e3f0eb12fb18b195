"""Synthetic workloads: job type profiles, presets, and trace files.

Profile numbers are invented calibration constants. Their purpose is to
order the five job types by intermediate-data volume (a grep-style scan
produces almost nothing; a permutation generator inflates its input)
while keeping per-block map time uniform, so scheduling differences come
from shuffle weight and data placement rather than task length.
"""

from __future__ import annotations

import configparser
import math
import random
from dataclasses import dataclass, field

from .cluster import GiB, ClusterConfig, JobSpec
from .errors import ConfigError, ParseError

JOB_TYPES = ("Grep", "WordCount", "InvertedIndex", "Sort", "PermutationGenerator")


@dataclass(frozen=True)
class WorkloadProfile:
    """Per-type constants used to synthesize job behavior."""

    name: str
    base_map_time_per_block: float = 20.0
    intermediate_ratio: float = 1.0
    base_reduce_time: float | None = None  # defaults to the map time

    @property
    def reduce_time(self) -> float:
        if self.base_reduce_time is None:
            return self.base_map_time_per_block
        return self.base_reduce_time

    def default_reduce_count(self, input_size: int) -> int:
        """One reduce task per started GiB of input."""
        return max(1, math.ceil(input_size / GiB))

    def intermediate_bytes(self, input_size: int) -> float:
        return input_size * self.intermediate_ratio


DEFAULT_PROFILES: dict[str, WorkloadProfile] = {
    "Grep": WorkloadProfile("Grep", intermediate_ratio=0.01),
    "WordCount": WorkloadProfile("WordCount", intermediate_ratio=0.3),
    "InvertedIndex": WorkloadProfile("InvertedIndex", intermediate_ratio=0.5),
    "Sort": WorkloadProfile("Sort", intermediate_ratio=1.0),
    "PermutationGenerator": WorkloadProfile("PermutationGenerator", intermediate_ratio=3.0),
}


def load_profiles(path) -> dict[str, WorkloadProfile]:
    """Read profile overrides from an INI-style file.

    Each section names a job type; keys are ``intermediate_ratio``,
    ``base_map_time_per_block``, and ``base_reduce_time``.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ParseError(f"cannot read profile file {path}")
    profiles = dict(DEFAULT_PROFILES)
    for section in parser.sections():
        base = profiles.get(section, WorkloadProfile(section))
        try:
            profiles[section] = WorkloadProfile(
                name=section,
                base_map_time_per_block=parser.getfloat(
                    section, "base_map_time_per_block",
                    fallback=base.base_map_time_per_block),
                intermediate_ratio=parser.getfloat(
                    section, "intermediate_ratio", fallback=base.intermediate_ratio),
                base_reduce_time=parser.getfloat(
                    section, "base_reduce_time", fallback=base.base_reduce_time),
            )
        except ValueError as exc:
            raise ParseError(f"bad profile value in [{section}]: {exc}") from None
    return profiles


@dataclass(frozen=True)
class SweepTuning:
    """Deadline and arrival knobs for the contended sweep preset.

    Deadlines take the serialized shuffle at a premium plus the slot-work
    at a target parallelism plus a flat slack; each knob may be a single
    number or a per-type mapping. The defaults are calibration values
    with a deliberate shape: the four lighter types get deadlines well
    under what an equal-share split of the cluster delivers, so only a
    scheduler that prioritizes by deadline can come close to them, while
    the shuffle-heavy type gets a loose deadline whose slack outlasts the
    crunch — it stays worth pacing after the urgent types drain, and its
    long serialized copy ends up overlapped with leftover work instead
    of dangling past the end of the run.
    """

    shuffle_premium: float | dict = 1.0
    flat_slack: float | dict = field(default_factory=lambda: {
        "Grep": 61.5,
        "WordCount": 107.0,
        "InvertedIndex": 94.2,
        "Sort": 107.0,
        "PermutationGenerator": 427.5,
    })
    parallelism_target: float | dict = field(default_factory=lambda: {
        "Grep": 10.75,
        "WordCount": 12.45,
        "InvertedIndex": 12.65,
        "Sort": 14.28,
        "PermutationGenerator": 21.89,
    })
    submit_round_gap: float = 0.0  # seconds between size rounds

    def _knob(self, name: str, type_name: str) -> float:
        value = getattr(self, name)
        if isinstance(value, dict):
            try:
                return float(value[type_name])
            except KeyError:
                raise ConfigError(
                    f"sweep tuning {name} has no entry for job type {type_name!r}"
                ) from None
        return float(value)

    def deadline_for(self, profile: WorkloadProfile, input_size: int,
                     reduce_count: int, config: ClusterConfig) -> float:
        blocks = math.ceil(input_size / config.block_size)
        map_work = blocks * profile.base_map_time_per_block
        reduce_work = reduce_count * profile.reduce_time
        shuffle = profile.intermediate_bytes(input_size) / config.network_bandwidth
        return round(
            shuffle * self._knob("shuffle_premium", profile.name)
            + (map_work + reduce_work) / self._knob("parallelism_target", profile.name)
            + self._knob("flat_slack", profile.name),
            1,
        )


SWEEP_SIZES_GB = (2, 4, 6, 8, 10)

# Deadline and size pairs for the five-job reference mix.
REFERENCE_MIX = (
    ("Grep", 10 * GiB, 650.0),
    ("WordCount", 5 * GiB, 520.0),
    ("Sort", 10 * GiB, 500.0),
    ("PermutationGenerator", 4 * GiB, 850.0),
    ("InvertedIndex", 8 * GiB, 720.0),
)


@dataclass(frozen=True)
class RandomWorkloadParams:
    """Knobs for the seeded random workload generator."""

    job_count: int = 10
    types: tuple = JOB_TYPES
    min_size_gb: int = 1
    max_size_gb: int = 10
    submit_span: float = 300.0
    deadline_stretch_min: float = 1.2
    deadline_stretch_max: float = 3.0
    parallelism_target: float = 6.0


def _sweep_jobs(config, profiles, tuning):
    jobs = []
    for round_index, size_gb in enumerate(SWEEP_SIZES_GB):
        submit = round_index * tuning.submit_round_gap
        for type_name in JOB_TYPES:
            profile = profiles[type_name]
            size = size_gb * GiB
            reduces = profile.default_reduce_count(size)
            jobs.append(JobSpec(
                job_id=f"{type_name.lower()}-{size_gb}g",
                submit_time=submit,
                job_type=type_name,
                input_size=size,
                deadline=tuning.deadline_for(profile, size, reduces, config),
                reduce_task_count=reduces,
            ))
    return jobs


def _reference_jobs(profiles):
    jobs = []
    for type_name, size, deadline in REFERENCE_MIX:
        profile = profiles[type_name]
        jobs.append(JobSpec(
            job_id=f"{type_name.lower()}-ref",
            submit_time=0.0,
            job_type=type_name,
            input_size=size,
            deadline=deadline,
            reduce_task_count=profile.default_reduce_count(size),
        ))
    return jobs


def _random_jobs(params: RandomWorkloadParams, seed, config, profiles):
    rng = random.Random(f"{seed}/workload")
    jobs = []
    for i in range(params.job_count):
        type_name = rng.choice(list(params.types))
        profile = profiles[type_name]
        size = rng.randint(params.min_size_gb, params.max_size_gb) * GiB
        reduces = profile.default_reduce_count(size)
        blocks = math.ceil(size / config.block_size)
        map_work = blocks * profile.base_map_time_per_block
        reduce_work = reduces * profile.reduce_time
        shuffle = profile.intermediate_bytes(size) / config.network_bandwidth
        fluid = (map_work + reduce_work) / params.parallelism_target + shuffle
        stretch = rng.uniform(params.deadline_stretch_min, params.deadline_stretch_max)
        jobs.append(JobSpec(
            job_id=f"rand{i}",
            submit_time=round(rng.uniform(0.0, params.submit_span), 3),
            job_type=type_name,
            input_size=size,
            deadline=round(fluid * stretch, 3),
            reduce_task_count=reduces,
        ))
    return jobs


PRESETS = ("paper-sweep", "table2")


def synth_workload(preset, seed=0, config: ClusterConfig | None = None,
                   profiles: dict[str, WorkloadProfile] | None = None,
                   tuning: SweepTuning | None = None) -> list[JobSpec]:
    """Build a job list from a preset name or RandomWorkloadParams.

    The sweep preset is deterministic by construction; the seed matters
    only for random workloads (simulation randomness is seeded at run
    time, not here).
    """
    config = config or ClusterConfig()
    profiles = profiles or DEFAULT_PROFILES
    if isinstance(preset, RandomWorkloadParams):
        return _random_jobs(preset, seed, config, profiles)
    if preset == "paper-sweep":
        return _sweep_jobs(config, profiles, tuning or SweepTuning())
    if preset == "table2":
        return _reference_jobs(profiles)
    raise ParseError(f"unknown workload preset {preset!r}")


TRACE_HEADER = "# job_id submit_time job_type input_size_bytes deadline_s reduce_tasks"


def parse_trace(path, profiles: dict[str, WorkloadProfile] | None = None) -> list[JobSpec]:
    """Read a whitespace-separated job trace file."""
    jobs = []
    seen = set()
    with open(path) as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ParseError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            job_id, submit_s, type_name, size_s, deadline_s, reduces_s = parts
            if job_id in seen:
                raise ParseError(f"{path}:{lineno}: duplicate job id {job_id!r}")
            seen.add(job_id)
            if profiles is not None and type_name not in profiles:
                raise ParseError(f"{path}:{lineno}: unknown job type {type_name!r}")
            try:
                spec = JobSpec(
                    job_id=job_id,
                    submit_time=float(submit_s),
                    job_type=type_name,
                    input_size=int(size_s),
                    deadline=float(deadline_s),
                    reduce_task_count=int(reduces_s),
                )
            except Exception as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            jobs.append(spec)
    return jobs


def write_trace(jobs: list[JobSpec], path) -> None:
    """Write jobs in the trace file format; floats keep full precision."""
    with open(path, "w") as handle:
        handle.write(TRACE_HEADER + "\n")
        for job in jobs:
            handle.write(
                f"{job.job_id} {job.submit_time!r} {job.job_type} "
                f"{job.input_size} {job.deadline!r} {job.reduce_task_count}\n"
            )
