"""End-to-end task evaluation, success-rate metrics, and the evaluation log.

A task verdict is hierarchical: per-column verdicts roll up into per-model
verdicts, which roll up into the task outcome.  The SRDT denominator counts
every data model of every task, including tasks that failed extraction, so
that the headline fraction is stable across failure modes.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .equivalence import ColumnVerdict, EvalConfig, ScaleEvidence, columns_equivalent
from .errors import BundleError, LogFormatError, UsageError
from .tabular import TableArtifact, TaskSpec, load_table_file, project_column

LOG_SCHEMA_VERSION = "1"


class FailureClass(str, Enum):
    NONE = "none"
    EXTRACTION_FAILURE = "extraction_failure"
    SCHEMA_ERROR = "schema_error"
    COLUMN_MISMATCH = "column_mismatch"


@dataclass(frozen=True)
class ModelVerdict:
    model_name: str
    column_verdicts: tuple[ColumnVerdict, ...]
    passed: bool
    table_missing: bool = False


@dataclass(frozen=True)
class TaskVerdict:
    task_id: str
    el_passed: bool
    model_verdicts: tuple[ModelVerdict, ...]
    failure_class: FailureClass
    models_total: int

    def unmatched_columns(self) -> list[tuple[str, str]]:
        return [
            (m.model_name, cv.column)
            for m in self.model_verdicts
            for cv in m.column_verdicts
            if not cv.matched
        ]


@dataclass(frozen=True)
class MetricsSummary:
    srdel: float
    srdt: float
    models_passed: int
    models_total: int
    tasks_total: int
    unmatched_columns: int

    def to_dict(self) -> dict:
        return {
            "srdel": self.srdel,
            "srdt": self.srdt,
            "srdel_pct": round(self.srdel * 100, 2),
            "srdt_pct": round(self.srdt * 100, 2),
            "models_passed": self.models_passed,
            "models_total": self.models_total,
            "tasks_total": self.tasks_total,
            "unmatched_columns": self.unmatched_columns,
        }


def check_extraction(staging: list[TableArtifact], sources: list[TableArtifact]) -> bool:
    """True iff every source table has a staging counterpart with an
    identical row multiset (raw-text equality)."""
    staged = {t.model_name: t for t in staging}
    for source in sources:
        counterpart = staged.get(source.model_name)
        if counterpart is None:
            return False
        if source.column_names != counterpart.column_names:
            return False
        if Counter(source.rows_raw()) != Counter(counterpart.rows_raw()):
            return False
    return True


def _evaluate_model(task: TaskSpec, model_name: str, cfg: EvalConfig) -> ModelVerdict:
    spec = task.model(model_name)
    gt = load_table_file(task.gt_path(model_name), spec=spec, tokens=cfg.tokens)
    pred_path = task.predicted_csv_path(model_name)
    if not pred_path.exists():
        return ModelVerdict(model_name, (), passed=False, table_missing=True)
    pred = load_table_file(pred_path, tokens=cfg.tokens)

    row_keys = None
    if spec.key_columns and all(pred.has_column(k) for k in spec.key_columns):
        row_keys = [
            "|".join(project_column(gt, k).cells[i].raw for k in spec.key_columns)
            for i in range(gt.row_count)
        ]

    verdicts = []
    for col_spec in spec.columns:
        gt_col = project_column(gt, col_spec.name)
        if not pred.has_column(col_spec.name):
            verdicts.append(
                ColumnVerdict(
                    column=col_spec.name,
                    matched=False,
                    match_rate=0.0,
                    evidence=(("__missing_column__", col_spec.name, ""),),
                )
            )
            continue
        verdicts.append(
            columns_equivalent(
                gt_col,
                project_column(pred, col_spec.name),
                cfg,
                order_sensitive=spec.order_sensitive or None,
                null_directive=col_spec.null_directive,
                row_keys=row_keys,
            )
        )
    return ModelVerdict(
        model_name,
        tuple(verdicts),
        passed=all(v.matched for v in verdicts),
    )


def evaluate_task(
    task: TaskSpec,
    cfg: EvalConfig,
    recorded_el: dict[str, bool] | None = None,
) -> TaskVerdict:
    """Evaluate one task: extraction check, then per-model column comparison.

    Extraction is computed from staging/source artifacts when both are
    present; otherwise the recorded outcome map is consulted (defaulting to
    passed).  Recorded and computed results are treated identically.
    """
    models_total = len(task.data_models)
    if "staging" in task.artifact_paths and "sources" in task.artifact_paths:
        sources = [
            load_table_file(p, tokens=cfg.tokens)
            for p in sorted(Path(task.artifact_paths["sources"]).glob("*.csv"))
        ]
        staging = [
            load_table_file(p, tokens=cfg.tokens)
            for p in sorted(Path(task.artifact_paths["staging"]).glob("*.csv"))
        ]
        el_passed = check_extraction(staging, sources)
    elif recorded_el is not None:
        el_passed = bool(recorded_el.get(task.task_id, True))
    else:
        el_passed = True

    if not el_passed:
        return TaskVerdict(
            task.task_id, False, (), FailureClass.EXTRACTION_FAILURE, models_total
        )

    model_verdicts = tuple(
        _evaluate_model(task, m.model_name, cfg) for m in task.data_models
    )
    if any(m.table_missing for m in model_verdicts):
        failure = FailureClass.SCHEMA_ERROR
    elif any(not m.passed for m in model_verdicts):
        failure = FailureClass.COLUMN_MISMATCH
    else:
        failure = FailureClass.NONE
    return TaskVerdict(task.task_id, True, model_verdicts, failure, models_total)


def load_recorded_outcomes(path: Path | str) -> dict[str, bool]:
    """Read the recorded extraction-outcome file: JSON task_id -> bool."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise BundleError(f"cannot read recorded outcomes '{path}': {exc}") from exc
    if not isinstance(doc, dict):
        raise BundleError(f"recorded outcome file '{path}' must be a JSON object")
    return {str(k): bool(v) for k, v in doc.items()}


def compute_metrics(verdicts: list[TaskVerdict]) -> MetricsSummary:
    """Aggregate success rates over a verdict set.

    srdel counts extraction-passed tasks; srdt counts passed models over the
    models of every task (extraction failures count in the denominator as
    failed).  The unmatched-column total covers exactly the tasks that
    produced comparable outputs (failure class column_mismatch), which is
    the population the audit operates on.
    """
    if not verdicts:
        raise UsageError("compute_metrics requires at least one task verdict")
    tasks_total = len(verdicts)
    el_passed = sum(1 for v in verdicts if v.el_passed)
    models_total = sum(v.models_total for v in verdicts)
    models_passed = sum(
        1 for v in verdicts for m in v.model_verdicts if m.passed
    )
    unmatched = sum(
        len(v.unmatched_columns())
        for v in verdicts
        if v.failure_class is FailureClass.COLUMN_MISMATCH
    )
    return MetricsSummary(
        srdel=el_passed / tasks_total,
        srdt=models_passed / models_total if models_total else 0.0,
        models_passed=models_passed,
        models_total=models_total,
        tasks_total=tasks_total,
        unmatched_columns=unmatched,
    )


def _column_record(task_id: str, model_name: str, cv: ColumnVerdict) -> dict:
    record = {
        "kind": "column",
        "task_id": task_id,
        "model_name": model_name,
        "column": cv.column,
        "matched": cv.matched,
        "match_rate": cv.match_rate,
        "applied_rules": list(cv.applied_rules),
        "evidence": [list(e) for e in cv.evidence],
    }
    if cv.scale is not None:
        record["scale"] = {
            "ratio": cv.scale.ratio,
            "pair_count": cv.scale.pair_count,
            "max_rel_deviation": cv.scale.max_rel_deviation,
        }
    return record


def write_eval_log(verdicts: list[TaskVerdict]) -> bytes:
    """Serialize verdicts as JSON Lines, append-ordered by task id."""
    lines = [json.dumps({"kind": "header", "schema_version": LOG_SCHEMA_VERSION})]
    for verdict in sorted(verdicts, key=lambda v: v.task_id):
        lines.append(
            json.dumps(
                {
                    "kind": "task",
                    "task_id": verdict.task_id,
                    "el_passed": verdict.el_passed,
                    "failure_class": verdict.failure_class.value,
                    "models_total": verdict.models_total,
                }
            )
        )
        for model in verdict.model_verdicts:
            lines.append(
                json.dumps(
                    {
                        "kind": "model",
                        "task_id": verdict.task_id,
                        "model_name": model.model_name,
                        "passed": model.passed,
                        "table_missing": model.table_missing,
                    }
                )
            )
            for cv in model.column_verdicts:
                lines.append(json.dumps(_column_record(verdict.task_id, model.model_name, cv)))
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_eval_log(content: bytes | str) -> list[TaskVerdict]:
    """Parse a JSON Lines evaluation log back into the verdict hierarchy."""
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    lines = [ln for ln in content.splitlines() if ln.strip()]
    if not lines:
        raise LogFormatError("evaluation log is empty (missing header)")

    def parse_line(number: int, line: str) -> dict:
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"malformed record at line {number}: {exc.msg}") from exc
        if not isinstance(record, dict) or "kind" not in record:
            raise LogFormatError(f"malformed record at line {number}: missing 'kind'")
        return record

    header = parse_line(1, lines[0])
    if header.get("kind") != "header":
        raise LogFormatError("first record must be the header")
    version = header.get("schema_version")
    if version != LOG_SCHEMA_VERSION:
        raise LogFormatError(
            f"unknown log schema version {version!r}, expected {LOG_SCHEMA_VERSION!r}"
        )

    tasks: dict[str, dict] = {}
    order: list[str] = []
    for number, line in enumerate(lines[1:], start=2):
        record = parse_line(number, line)
        kind = record["kind"]
        try:
            if kind == "task":
                task_id = record["task_id"]
                tasks[task_id] = {"record": record, "models": {}, "model_order": []}
                order.append(task_id)
            elif kind == "model":
                entry = tasks[record["task_id"]]
                entry["models"][record["model_name"]] = {"record": record, "columns": []}
                entry["model_order"].append(record["model_name"])
            elif kind == "column":
                scale = record.get("scale")
                tasks[record["task_id"]]["models"][record["model_name"]]["columns"].append(
                    ColumnVerdict(
                        column=record["column"],
                        matched=record["matched"],
                        match_rate=record["match_rate"],
                        evidence=tuple(tuple(e) for e in record.get("evidence", [])),
                        applied_rules=tuple(record.get("applied_rules", [])),
                        scale=ScaleEvidence(**scale) if scale else None,
                    )
                )
            else:
                raise LogFormatError(f"unknown record kind {kind!r} at line {number}")
        except KeyError as exc:
            raise LogFormatError(f"malformed record at line {number}: missing {exc}") from exc

    verdicts = []
    for task_id in order:
        entry = tasks[task_id]
        record = entry["record"]
        models = tuple(
            ModelVerdict(
                model_name=name,
                column_verdicts=tuple(entry["models"][name]["columns"]),
                passed=entry["models"][name]["record"]["passed"],
                table_missing=entry["models"][name]["record"].get("table_missing", False),
            )
            for name in entry["model_order"]
        )
        verdicts.append(
            TaskVerdict(
                task_id=task_id,
                el_passed=record["el_passed"],
                model_verdicts=models,
                failure_class=FailureClass(record["failure_class"]),
                models_total=record["models_total"],
            )
        )
    return verdicts
