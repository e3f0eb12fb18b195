import importlib.resources

import pytest

from vmrsim.cluster import GiB, ClusterConfig
from vmrsim.errors import ParseError
from vmrsim.workload import (
    DEFAULT_PROFILES,
    JOB_TYPES,
    RandomWorkloadParams,
    SweepTuning,
    load_profiles,
    parse_trace,
    synth_workload,
    write_trace,
)


class TestProfiles:
    def test_five_types_present(self):
        assert set(DEFAULT_PROFILES) == set(JOB_TYPES)

    def test_types_ordered_by_intermediate_ratio(self):
        ratios = [
            DEFAULT_PROFILES[t].intermediate_ratio
            for t in ("Grep", "WordCount", "InvertedIndex", "Sort", "PermutationGenerator")
        ]
        assert ratios == sorted(ratios)
        assert ratios[0] < 0.1 < 1.0 <= ratios[-2] < ratios[-1]

    def test_uniform_map_time(self):
        assert {p.base_map_time_per_block for p in DEFAULT_PROFILES.values()} == {20.0}

    def test_reduce_time_defaults_to_map_time(self):
        assert DEFAULT_PROFILES["Sort"].reduce_time == 20.0

    def test_default_reduce_count_one_per_gib(self):
        p = DEFAULT_PROFILES["Sort"]
        assert p.default_reduce_count(10 * GiB) == 10
        assert p.default_reduce_count(GiB // 2) == 1

    def test_shipped_profile_file_matches_defaults(self):
        ref = importlib.resources.files("vmrsim") / "data" / "default_profiles.conf"
        loaded = load_profiles(str(ref))
        assert loaded == DEFAULT_PROFILES

    def test_profile_override_file(self, tmp_path):
        path = tmp_path / "p.conf"
        path.write_text("[Grep]\nintermediate_ratio = 0.2\n")
        loaded = load_profiles(path)
        assert loaded["Grep"].intermediate_ratio == 0.2
        assert loaded["Sort"] == DEFAULT_PROFILES["Sort"]

    def test_missing_profile_file_raises(self, tmp_path):
        with pytest.raises(ParseError):
            load_profiles(tmp_path / "absent.conf")


class TestSweepPreset:
    def test_twentyfive_jobs_five_per_type(self):
        jobs = synth_workload("paper-sweep")
        assert len(jobs) == 25
        for t in JOB_TYPES:
            sizes = sorted(j.input_size for j in jobs if j.job_type == t)
            assert sizes == [2 * GiB, 4 * GiB, 6 * GiB, 8 * GiB, 10 * GiB]

    def test_deadlines_monotone_in_size_per_type(self):
        jobs = synth_workload("paper-sweep")
        for t in JOB_TYPES:
            deadlines = [
                j.deadline for j in sorted(
                    (j for j in jobs if j.job_type == t), key=lambda j: j.input_size)
            ]
            assert deadlines == sorted(deadlines)

    def test_deterministic_regardless_of_seed(self):
        assert synth_workload("paper-sweep", seed=1) == synth_workload("paper-sweep", seed=9)

    def test_reduce_counts_follow_default_rule(self):
        jobs = synth_workload("paper-sweep")
        for job in jobs:
            assert job.reduce_task_count == job.input_size // GiB

    def test_tuning_changes_deadlines(self):
        loose = synth_workload("paper-sweep", tuning=SweepTuning(flat_slack=500.0))
        tight = synth_workload("paper-sweep", tuning=SweepTuning(flat_slack=10.0))
        assert all(a.deadline > b.deadline for a, b in zip(loose, tight))


class TestReferenceMix:
    def test_five_reference_jobs(self):
        jobs = synth_workload("table2")
        by_type = {j.job_type: j for j in jobs}
        assert len(jobs) == 5
        assert by_type["Grep"].deadline == 650.0
        assert by_type["Grep"].input_size == 10 * GiB
        assert by_type["WordCount"].deadline == 520.0
        assert by_type["WordCount"].input_size == 5 * GiB
        assert by_type["Sort"].deadline == 500.0
        assert by_type["Sort"].input_size == 10 * GiB
        assert by_type["PermutationGenerator"].deadline == 850.0
        assert by_type["PermutationGenerator"].input_size == 4 * GiB
        assert by_type["InvertedIndex"].deadline == 720.0
        assert by_type["InvertedIndex"].input_size == 8 * GiB

    def test_reduce_counts_derived_from_size(self):
        jobs = synth_workload("table2")
        by_type = {j.job_type: j for j in jobs}
        assert by_type["Grep"].reduce_task_count == 10
        assert by_type["PermutationGenerator"].reduce_task_count == 4


class TestRandomWorkload:
    def test_same_seed_same_jobs(self):
        params = RandomWorkloadParams(job_count=8)
        assert synth_workload(params, seed=3) == synth_workload(params, seed=3)

    def test_different_seed_differs(self):
        params = RandomWorkloadParams(job_count=8)
        assert synth_workload(params, seed=3) != synth_workload(params, seed=4)

    def test_job_count_and_types(self):
        params = RandomWorkloadParams(job_count=12, types=("Sort",))
        jobs = synth_workload(params, seed=0)
        assert len(jobs) == 12
        assert {j.job_type for j in jobs} == {"Sort"}

    def test_unknown_preset_rejected(self):
        with pytest.raises(ParseError):
            synth_workload("mystery")


class TestTraceFiles:
    def test_round_trip_preserves_jobs(self, tmp_path):
        jobs = synth_workload("paper-sweep")
        path = tmp_path / "jobs.trace"
        write_trace(jobs, path)
        assert parse_trace(path) == jobs

    def test_random_round_trip_preserves_floats(self, tmp_path):
        jobs = synth_workload(RandomWorkloadParams(job_count=20), seed=11)
        path = tmp_path / "jobs.trace"
        write_trace(jobs, path)
        assert parse_trace(path) == jobs

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "jobs.trace"
        path.write_text(
            "# a comment\n"
            "\n"
            "j1 0.0 Sort 1073741824 500.0 1  # trailing comment\n"
        )
        jobs = parse_trace(path)
        assert len(jobs) == 1
        assert jobs[0].job_id == "j1"
        assert jobs[0].input_size == GiB

    def test_wrong_field_count_raises_with_line(self, tmp_path):
        path = tmp_path / "jobs.trace"
        path.write_text("j1 0.0 Sort 1073741824 500.0\n")
        with pytest.raises(ParseError, match=":1"):
            parse_trace(path)

    def test_bad_number_raises(self, tmp_path):
        path = tmp_path / "jobs.trace"
        path.write_text("j1 zero Sort 1073741824 500.0 1\n")
        with pytest.raises(ParseError):
            parse_trace(path)

    def test_duplicate_job_id_raises(self, tmp_path):
        path = tmp_path / "jobs.trace"
        path.write_text(
            "j1 0.0 Sort 1073741824 500.0 1\n"
            "j1 5.0 Grep 1073741824 400.0 1\n"
        )
        with pytest.raises(ParseError, match="duplicate"):
            parse_trace(path)

    def test_unknown_type_rejected_when_profiles_given(self, tmp_path):
        path = tmp_path / "jobs.trace"
        path.write_text("j1 0.0 Mystery 1073741824 500.0 1\n")
        with pytest.raises(ParseError, match="Mystery"):
            parse_trace(path, profiles=DEFAULT_PROFILES)

    def test_negative_deadline_rejected(self, tmp_path):
        path = tmp_path / "jobs.trace"
        path.write_text("j1 0.0 Sort 1073741824 -5.0 1\n")
        with pytest.raises(ParseError):
            parse_trace(path)
