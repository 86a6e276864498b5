"""Simulator determinism, post-hoc log invariants, and trace auditing."""

import pytest

from veilmod.config import ExperimentConfig
from veilmod.errors import ConflictError
from veilmod.eventlog import replay
from veilmod.experiment import REVEAL_KIND_TOOL, make_stage_config
from veilmod.report import build_report, canonical_report_bytes, state_from_records
from veilmod.simulate import audit_trace, load_profile, run_simulation


def make_config(small_corpus, tmp_path, tag, **overrides):
    kwargs = dict(
        experiment_id="sim",
        corpus_dir=small_corpus.root,
        log_dir=tmp_path / tag,
        cache_dir=tmp_path / "cache",
        tasks_per_session=2,
        seed=11,
        admin_token="adm",
    )
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


@pytest.fixture(scope="module")
def sim_run(small_corpus, tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("sim")
    config = make_config(small_corpus, tmp_path, "a")
    return run_simulation(config, 6, "identity"), tmp_path, small_corpus


class TestDeterminism:
    def test_second_run_is_byte_identical(self, sim_run):
        result, tmp_path, corpus = sim_run
        again = run_simulation(make_config(corpus, tmp_path, "b"), 6, "identity")
        assert again.log_path.read_bytes() == result.log_path.read_bytes()
        assert again.trace_path.read_bytes() == result.trace_path.read_bytes()
        assert again.report_path.read_bytes() == result.report_path.read_bytes()

    def test_different_seed_differs(self, sim_run):
        result, tmp_path, corpus = sim_run
        other = run_simulation(
            make_config(corpus, tmp_path, "c", seed=12), 6, "identity"
        )
        assert other.log_path.read_bytes() != result.log_path.read_bytes()

    def test_refuses_to_overwrite_log(self, sim_run):
        result, tmp_path, corpus = sim_run
        with pytest.raises(ConflictError):
            run_simulation(make_config(corpus, tmp_path, "a"), 6, "identity")


class TestReportContent:
    def test_identity_accuracy_is_one_in_all_six_stages(self, sim_run):
        result, _, _ = sim_run
        assert sorted(result.report["stages"], key=int) == ["1", "2", "3", "4", "5", "6"]
        for section in result.report["stages"].values():
            assert section["accuracy"]["q1_accuracy"] == 1.0
            assert section["survey"]["n"] == 1

    def test_replayed_report_matches_live_bytes(self, sim_run):
        result, _, corpus = sim_run
        records, skipped = replay(result.log_path)
        assert skipped == 0
        state = state_from_records(records)
        replayed = canonical_report_bytes(build_report(state, corpus))
        assert replayed == result.report_path.read_bytes()


class TestPostHocInvariants:
    def test_log_never_contains_disallowed_reveal_kind(self, sim_run):
        result, _, _ = sim_run
        records, _ = replay(result.log_path)
        stage_of = {}
        for record in records:
            if record.kind == "session_started":
                stage_of[record.payload["session_id"]] = record.payload["stage_id"]
        checked = 0
        for record in records:
            if record.kind != "reveal":
                continue
            stage = make_stage_config(stage_of[record.payload["session_id"]])
            assert REVEAL_KIND_TOOL[record.payload["kind"]] == stage.reveal_tool
            checked += 1
        assert checked > 0

    def test_trace_audit_passes_and_counts_probes(self, sim_run):
        result, _, _ = sim_run
        stats = audit_trace(result.trace_path, result.log_path)
        assert stats["full_image_below_sigma"] == 0
        assert stats["tile_responses"] == stats["region_reveals"] > 0
        assert stats["refused_image_requests"] >= result.n_probes_rejected > 0

    def test_sequences_are_contiguous(self, sim_run):
        result, _, _ = sim_run
        records, _ = replay(result.log_path)
        assert [r.seq for r in records] == list(range(1, len(records) + 1))


class TestProfiles:
    def test_builtin_profiles_valid(self):
        for name in ("identity", "uniform"):
            profile = load_profile(name)
            assert set(profile.q1_confusion) == {"sex_nudity", "graphic", "safe"}

    def test_profile_rows_must_sum_to_one(self):
        from veilmod.errors import ValidationError

        with pytest.raises(ValidationError):
            load_profile({"q1_confusion": {
                "sex_nudity": {"safe": 0.5},
                "graphic": {"graphic": 1.0},
                "safe": {"safe": 1.0},
            }})

    def test_uniform_profile_accuracy_near_chance(self, small_corpus, tmp_path):
        config = make_config(small_corpus, tmp_path, "u",
                             stages=(2,), tasks_per_session=6, seed=3)
        result = run_simulation(config, 10, "uniform")
        accuracy = result.report["stages"]["2"]["accuracy"]["q1_accuracy"]
        n = result.report["stages"]["2"]["accuracy"]["n_responses"]
        assert n == 60
        sigma = (1 / 3 * 2 / 3 / n) ** 0.5
        assert abs(accuracy - 1 / 3) <= 3 * sigma
