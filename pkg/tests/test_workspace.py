import pytest

from veribench.equivalence import PRESETS
from veribench.errors import BundleError, UsageError
from veribench.evaluator import evaluate_task, load_recorded_outcomes, write_eval_log
from veribench.synthetic import study_verdicts
from veribench.tabular import load_task
from veribench.workspace import (
    build_work_queue,
    materialize_environment,
    open_environment,
)


class TestBuildWorkQueue:
    def test_clean_log_empty_queue(self, study):
        verdicts = study_verdicts(study, "patched", remove_gt_columns=True)
        clean = [v for v in verdicts if not v.unmatched_columns()]
        assert build_work_queue(clean) == []

    def test_study_scale_counts(self, study_logs):
        queue = build_work_queue(study_logs["original"])
        assert sum(len(w.columns) for w in queue) == 660
        assert len(queue) == 136
        assert len({w.task_id for w in queue}) == 81

    def test_excludes_extraction_and_schema_tasks(self, study_logs):
        queue = build_work_queue(study_logs["original"])
        task_ids = {w.task_id for w in queue}
        assert not any(t.startswith("ext") or t.startswith("sch") for t in task_ids)

    def test_round_trip_through_log_bytes(self, study_logs):
        content = write_eval_log(study_logs["original"])
        assert build_work_queue(content) == build_work_queue(study_logs["original"])

    def test_two_task_log_exact_tuples(self, study_logs):
        # brute-force oracle: rescan the records by hand for two tasks
        subset = [v for v in study_logs["original"] if v.task_id in ("f001", "f027")]
        expected = []
        for verdict in subset:
            for model in verdict.model_verdicts:
                cols = tuple(
                    cv.column for cv in model.column_verdicts if not cv.matched
                )
                if cols:
                    expected.append((verdict.task_id, model.model_name, cols))
        queue = build_work_queue(subset)
        assert [(w.task_id, w.model_name, w.columns) for w in queue] == sorted(expected)

    def test_ordering_is_canonical(self, study_logs):
        queue = build_work_queue(study_logs["original"])
        keys = [(w.task_id, w.model_name) for w in queue]
        assert keys == sorted(keys)


@pytest.fixture()
def mini_queue(mini_benchmark):
    recorded = load_recorded_outcomes(mini_benchmark.root / "el_outcomes.json")
    verdicts = [
        evaluate_task(load_task(mini_benchmark.root, t), PRESETS["legacy"], recorded_el=recorded)
        for t in sorted(p.name for p in (mini_benchmark.root / "tasks").iterdir())
    ]
    return build_work_queue(verdicts)


class TestMaterializeEnvironment:
    def test_selective_contents(self, mini_benchmark, mini_queue, tmp_path):
        # t01 has one failing model of two: only that model's files may appear
        task = load_task(mini_benchmark.root, "t01")
        env = materialize_environment(task, mini_queue, tmp_path)
        files = {path for path, _ in env.manifest}
        assert "gt/growth.csv" in files
        assert "predicted/growth.csv" in files
        assert "predicted/growth.sql" in files
        model_files = [f for f in files if f.startswith(("gt/", "predicted/"))]
        assert not any("totals" in f for f in model_files)  # matched model excluded
        queue_models = {w.model_name for w in mini_queue if w.task_id == "t01"}
        manifest_models = {
            f.split("/")[1].split(".")[0] for f in files if f.startswith("gt/")
        }
        assert manifest_models == queue_models

    def test_spec_filtered_to_affected_models(self, mini_benchmark, mini_queue, tmp_path):
        task = load_task(mini_benchmark.root, "t01")
        env = materialize_environment(task, mini_queue, tmp_path)
        assert [m.model_name for m in env.models()] == ["growth"]

    def test_fully_matched_task_is_usage_error(self, mini_benchmark, mini_queue, tmp_path):
        task = load_task(mini_benchmark.root, "t01")
        with pytest.raises(UsageError):
            materialize_environment(task, [w for w in mini_queue if w.task_id == "zz"], tmp_path)

    def test_layout(self, mini_benchmark, mini_queue, tmp_path):
        task = load_task(mini_benchmark.root, "t03")
        env = materialize_environment(task, mini_queue, tmp_path)
        assert (env.root / "gt" / "ranking.csv").exists()
        assert (env.root / "predicted" / "ranking.sql").exists()
        assert (env.root / "data_model.yaml").exists()
        assert (env.root / "manifest.json").exists()

    def test_sources_copied_when_present(self, mini_benchmark, mini_queue, tmp_path):
        task = load_task(mini_benchmark.root, "t01")
        env = materialize_environment(task, mini_queue, tmp_path)
        assert (env.root / "sources" / "raw_totals.csv").exists()

    def test_idempotent_digests(self, mini_benchmark, mini_queue, tmp_path):
        task = load_task(mini_benchmark.root, "t02")
        first = materialize_environment(task, mini_queue, tmp_path)
        second = materialize_environment(task, mini_queue, tmp_path)
        assert first.manifest == second.manifest

    def test_manifest_digests_verify(self, mini_benchmark, mini_queue, tmp_path):
        task = load_task(mini_benchmark.root, "t02")
        materialize_environment(task, mini_queue, tmp_path)
        env = open_environment(tmp_path, "t02")
        assert env.manifest

    def test_tampered_environment_detected(self, mini_benchmark, mini_queue, tmp_path):
        task = load_task(mini_benchmark.root, "t02")
        env = materialize_environment(task, mini_queue, tmp_path)
        target = env.root / "gt" / "flags.csv"
        target.write_text(target.read_text() + "tampered,row\n")
        with pytest.raises(BundleError, match="digest"):
            open_environment(tmp_path, "t02")

    def test_missing_artifact_is_bundle_error(self, mini_benchmark, mini_queue, tmp_path):
        task = load_task(mini_benchmark.root, "t02")
        broken = [w for w in mini_queue if w.task_id == "t02"]
        (mini_benchmark.root / "tasks" / "t02" / "predicted" / "flags.csv").rename(
            mini_benchmark.root / "tasks" / "t02" / "predicted" / "flags.csv.bak"
        )
        try:
            with pytest.raises(BundleError):
                materialize_environment(task, broken, tmp_path / "broken")
        finally:
            (mini_benchmark.root / "tasks" / "t02" / "predicted" / "flags.csv.bak").rename(
                mini_benchmark.root / "tasks" / "t02" / "predicted" / "flags.csv"
            )

    def test_conservation_against_log(self, mini_benchmark, mini_queue):
        recorded = load_recorded_outcomes(mini_benchmark.root / "el_outcomes.json")
        verdicts = [
            evaluate_task(
                load_task(mini_benchmark.root, t), PRESETS["legacy"], recorded_el=recorded
            )
            for t in sorted(p.name for p in (mini_benchmark.root / "tasks").iterdir())
        ]
        from veribench.evaluator import compute_metrics

        metrics = compute_metrics(verdicts)
        assert metrics.unmatched_columns == sum(len(w.columns) for w in mini_queue)
