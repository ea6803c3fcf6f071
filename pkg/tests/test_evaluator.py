import pytest

from veribench.equivalence import PRESETS
from veribench.errors import LogFormatError, UsageError
from veribench.evaluator import (
    FailureClass,
    check_extraction,
    compute_metrics,
    evaluate_task,
    load_recorded_outcomes,
    parse_eval_log,
    write_eval_log,
)
from veribench.tabular import discover_tasks, load_table, load_task

LEGACY = PRESETS["legacy"]
VERIFIED = PRESETS["verified-v1"]


def table(name, content):
    return load_table(content, model_name=name)


class TestCheckExtraction:
    def test_identical(self):
        src = [table("t", "a,b\n1,2\n3,4\n")]
        assert check_extraction(src, src)

    def test_missing_staging_table(self):
        assert not check_extraction([], [table("t", "a\n1\n")])

    def test_extra_duplicate_row(self):
        # multiset oracle: one extra duplicate row must break equality
        source = table("t", "a\n1\n2\n")
        staged = table("t", "a\n1\n2\n2\n")
        from collections import Counter

        assert Counter(source.rows_raw()) != Counter(staged.rows_raw())
        assert not check_extraction([staged], [source])

    def test_reordered_rows_still_pass(self):
        source = table("t", "a,b\n1,2\n3,4\n")
        staged = table("t", "a,b\n3,4\n1,2\n")
        assert check_extraction([staged], [source])

    def test_extra_staging_tables_ignored(self):
        source = table("t", "a\n1\n")
        assert check_extraction([source, table("extra", "x\n9\n")], [source])


class TestEvaluateTask:
    def test_mini_benchmark_outcomes(self, mini_benchmark):
        recorded = load_recorded_outcomes(mini_benchmark.root / "el_outcomes.json")
        verdicts = {
            task_id: evaluate_task(
                load_task(mini_benchmark.root, task_id), LEGACY, recorded_el=recorded
            )
            for task_id in discover_tasks(mini_benchmark.root)
        }
        assert verdicts["t09"].failure_class is FailureClass.EXTRACTION_FAILURE
        assert verdicts["t09"].model_verdicts == ()
        assert verdicts["t09"].models_total == 1
        assert verdicts["t10"].failure_class is FailureClass.SCHEMA_ERROR
        assert verdicts["t01"].failure_class is FailureClass.COLUMN_MISMATCH
        assert verdicts["t07"].failure_class is FailureClass.COLUMN_MISMATCH
        season = verdicts["t07"].unmatched_columns()
        assert season == [("season", "num_won")]

    def test_all_columns_match(self, mini_benchmark):
        recorded = load_recorded_outcomes(mini_benchmark.root / "el_outcomes.json")
        verdict = evaluate_task(
            load_task(mini_benchmark.root, "t05"), VERIFIED, recorded_el=recorded
        )
        assert verdict.failure_class is FailureClass.COLUMN_MISMATCH  # gt corruption
        clean = evaluate_task(
            load_task(mini_benchmark.root, "t01"), VERIFIED, recorded_el=recorded
        )
        assert clean.failure_class is FailureClass.NONE
        assert all(m.passed for m in clean.model_verdicts)

    def test_live_extraction_check_used(self, mini_benchmark):
        # t01 carries sources/ and staging/; the recorded value is ignored
        verdict = evaluate_task(
            load_task(mini_benchmark.root, "t01"), VERIFIED, recorded_el={"t01": False}
        )
        assert verdict.el_passed

    def test_deterministic_bytes(self, mini_benchmark):
        recorded = load_recorded_outcomes(mini_benchmark.root / "el_outcomes.json")

        def log_bytes():
            verdicts = [
                evaluate_task(
                    load_task(mini_benchmark.root, task_id), LEGACY, recorded_el=recorded
                )
                for task_id in discover_tasks(mini_benchmark.root)
            ]
            return write_eval_log(verdicts)

        assert log_bytes() == log_bytes()


class TestComputeMetrics:
    def test_study_fixture_original(self, study_logs):
        metrics = compute_metrics(study_logs["original"])
        assert round(metrics.srdel * 100, 2) == 96.00
        assert round(metrics.srdt * 100, 2) == 22.66
        assert (metrics.models_passed, metrics.models_total) == (46, 203)
        assert metrics.unmatched_columns == 660

    def test_study_fixture_verified(self, study_logs):
        metrics = compute_metrics(study_logs["both"])
        assert round(metrics.srdt * 100, 2) == 32.51
        assert (metrics.models_passed, metrics.models_total) == (66, 203)

    def test_single_passing_task(self, study_logs):
        only = [v for v in study_logs["original"] if v.failure_class is FailureClass.NONE][:1]
        metrics = compute_metrics(only)
        assert metrics.srdel == 1.0 and metrics.srdt == 1.0

    def test_empty_is_usage_error(self):
        with pytest.raises(UsageError):
            compute_metrics([])

    def test_denominator_stable_under_removal(self, study_logs):
        for key in ("original", "script_only", "removal_only", "both"):
            assert compute_metrics(study_logs[key]).models_total == 203


class TestEvalLog:
    def test_round_trip(self, study_logs):
        verdicts = study_logs["original"]
        assert parse_eval_log(write_eval_log(verdicts)) == sorted(
            verdicts, key=lambda v: v.task_id
        )

    def test_study_scale_accounting(self, study_logs):
        content = write_eval_log(study_logs["original"])
        parsed = parse_eval_log(content)
        mismatch_tasks = [
            v for v in parsed if v.failure_class is FailureClass.COLUMN_MISMATCH
        ]
        assert len(mismatch_tasks) == 81
        unmatched = [
            (v.task_id, m.model_name, cv.column)
            for v in mismatch_tasks
            for m in v.model_verdicts
            for cv in m.column_verdicts
            if not cv.matched
        ]
        assert len(unmatched) == 660
        assert len({(t, m) for t, m, _ in unmatched}) == 136

    def test_empty_list_is_header_only(self):
        content = write_eval_log([])
        assert content.decode().strip().count("\n") == 0
        assert parse_eval_log(content) == []

    def test_unknown_version(self):
        with pytest.raises(LogFormatError, match="version"):
            parse_eval_log(b'{"kind": "header", "schema_version": "999"}\n')

    def test_malformed_record_reports_line(self):
        good = write_eval_log([]).decode()
        with pytest.raises(LogFormatError, match="line 2"):
            parse_eval_log(good + "not json\n")

    def test_missing_header(self):
        with pytest.raises(LogFormatError, match="header"):
            parse_eval_log(b'{"kind": "task", "task_id": "t"}\n')
