"""Deterministic synthetic fixtures.

Two generators live here.  ``build_recorded_study`` produces a verdict-level
fixture of a full 100-task benchmark audit: per-column outcomes, their
taxonomy labels, and the derived evaluation logs under the original and
patched semantics.  Every headline aggregate is asserted at construction
time, so tests and demos can rely on its arithmetic.  ``build_mini_benchmark``
materializes a small but complete bundle on disk with known-planted
representational mismatches, ground-truth corruption, and agent errors, for
end-to-end exercises of the evaluator, analyst, and corrector.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .equivalence import ColumnVerdict
from .evaluator import FailureClass, ModelVerdict, TaskVerdict
from .tabular import ColumnSpec, DataModelSpec, dump_data_model_specs
from .taxonomy import (
    ClassificationLedger,
    ColumnId,
    ErrorLeaf,
)

MATCHED = "matched"

_AGENT_POOL = (
    (ErrorLeaf.FLAWED_SQL_LOGIC, 221),
    (ErrorLeaf.JOIN_TYPE_ERROR, 157),
    (ErrorLeaf.WRONG_DATA_SOURCE, 38),
    (ErrorLeaf.DOMAIN_KNOWLEDGE_GAP, 16),
    (ErrorLeaf.KEY_GENERATION_ERROR, 6),
    (ErrorLeaf.NULL_HANDLING_ERROR, 4),
)
# Only the 156-column false-positive total is pinned by the aggregate
# assertions; the split across subcategories is a fixture choice.
_FP_POOL = (
    (ErrorLeaf.FP_ACTUAL_MATCH, 40),
    (ErrorLeaf.FP_FORMAT_MISMATCH, 50),
    (ErrorLeaf.FP_DUPLICATED_GT_ROWS, 10),
    (ErrorLeaf.FP_NULL_REPRESENTATION, 26),
    (ErrorLeaf.FP_ROW_ORDERING, 25),
    (ErrorLeaf.FP_OTHER, 5),
)

MATCHED_PAD_PER_MODEL = 8


@dataclass(frozen=True)
class PlannedColumn:
    task_id: str
    model_name: str
    column: str
    outcome: str  # MATCHED or an ErrorLeaf value

    @property
    def column_id(self) -> ColumnId:
        return ColumnId(self.task_id, self.model_name, self.column)

    @property
    def leaf(self) -> ErrorLeaf | None:
        return None if self.outcome == MATCHED else ErrorLeaf(self.outcome)


@dataclass(frozen=True)
class PlannedModel:
    task_id: str
    model_name: str
    columns: tuple[PlannedColumn, ...]


@dataclass(frozen=True)
class PlannedTask:
    task_id: str
    kind: str  # extraction_failed | schema_error | pass | fail
    models: tuple[PlannedModel, ...]


@dataclass(frozen=True)
class StudyFixture:
    tasks: tuple[PlannedTask, ...]

    def all_columns(self) -> list[PlannedColumn]:
        return [c for t in self.tasks for m in t.models for c in m.columns]

    def unmatched(self) -> list[PlannedColumn]:
        return [
            c
            for t in self.tasks
            if t.kind == "fail"
            for m in t.models
            for c in m.columns
            if c.outcome != MATCHED
        ]

    def gt_error_columns(self) -> list[PlannedColumn]:
        return [
            c for c in self.unmatched() if c.leaf is ErrorLeaf.GT_CALCULATION_ERROR
        ]


class _Pools:
    def __init__(self):
        self.agent = [leaf for leaf, n in _AGENT_POOL for _ in range(n)]
        self.fp = [leaf for leaf, n in _FP_POOL for _ in range(n)]
        self.ambiguous = [ErrorLeaf.AMBIGUOUS_DESCRIPTION] * 32
        self.gt = [ErrorLeaf.GT_CALCULATION_ERROR] * 30

    def take(self, name: str, count: int) -> list[ErrorLeaf]:
        pool = getattr(self, name)
        if count > len(pool):
            raise AssertionError(f"pool '{name}' exhausted: need {count}, have {len(pool)}")
        taken = pool[:count]
        setattr(self, name, pool[count:])
        return taken


def _model(task_id: str, name: str, unmatched: list[ErrorLeaf], matched_pad: int) -> PlannedModel:
    columns = []
    for i, leaf in enumerate(unmatched):
        columns.append(PlannedColumn(task_id, name, f"c{i + 1:02d}", leaf.value))
    for i in range(matched_pad):
        columns.append(
            PlannedColumn(task_id, name, f"c{len(unmatched) + i + 1:02d}", MATCHED)
        )
    return PlannedModel(task_id, name, tuple(columns))


def _all_matched_model(task_id: str, name: str, width: int) -> PlannedModel:
    return PlannedModel(
        task_id,
        name,
        tuple(
            PlannedColumn(task_id, name, f"c{i + 1:02d}", MATCHED) for i in range(width)
        ),
    )


def build_recorded_study() -> StudyFixture:
    """The full verdict-level audit fixture.

    100 tasks, 203 data models, 2,494 columns.  4 tasks fail extraction and
    6 hit schema errors; 9 tasks pass outright (46 models); the remaining
    81 tasks carry 136 models, each with at least one of the 660 unmatched
    columns.  Mismatch labels follow the audited distribution: 442 agent
    columns, 156 evaluation false positives, 32 ambiguous descriptions, and
    30 ground-truth calculation errors spanning 24 tasks.
    """
    pools = _Pools()
    tasks: list[PlannedTask] = []

    ext_widths = [(17, 16), (17, 16), (16, 17), (16, 17)]
    for i, widths in enumerate(ext_widths):
        task_id = f"ext{i + 1:02d}"
        models = tuple(
            _all_matched_model(task_id, f"m{j + 1}", w) for j, w in enumerate(widths)
        )
        tasks.append(PlannedTask(task_id, "extraction_failed", models))

    schema_model_counts = [2, 2, 2, 2, 2, 3]
    for i, count in enumerate(schema_model_counts):
        task_id = f"sch{i + 1:02d}"
        models = tuple(
            _all_matched_model(task_id, f"m{j + 1}", 10) for j in range(count)
        )
        tasks.append(PlannedTask(task_id, "schema_error", models))

    pass_model_counts = [5] * 8 + [6]
    wide = 24  # first models get 11 columns, the rest 10, totalling 484
    for i, count in enumerate(pass_model_counts):
        task_id = f"ok{i + 1:02d}"
        models = []
        for j in range(count):
            width = 11 if wide > 0 else 10
            wide -= 1
            models.append(_all_matched_model(task_id, f"m{j + 1}", width))
        tasks.append(PlannedTask(task_id, "pass", tuple(models)))

    fail_tasks: list[PlannedTask] = []

    def fail_task(task_id: str, models: list[PlannedModel]) -> None:
        fail_tasks.append(PlannedTask(task_id, "fail", tuple(models)))

    # 14 tasks with only agent-attributable mismatches.
    for i in range(14):
        task_id = f"f{i + 1:03d}"
        fail_task(task_id, [_model(task_id, "m1", pools.take("agent", 6), MATCHED_PAD_PER_MODEL)])

    # 12 tasks with only benchmark-attributable mismatches: four carrying the
    # ground-truth error models, six carrying pure false-positive models,
    # two carrying ambiguous-description models.
    for i, gt_count in enumerate((3, 2, 2, 2)):
        task_id = f"f{15 + i:03d}"
        fail_task(task_id, [_model(task_id, "m1", pools.take("gt", gt_count), MATCHED_PAD_PER_MODEL)])
    for i in range(6):
        task_id = f"f{19 + i:03d}"
        fail_task(task_id, [_model(task_id, "m1", pools.take("fp", 4), MATCHED_PAD_PER_MODEL)])
    for i in range(2):
        task_id = f"f{25 + i:03d}"
        fail_task(task_id, [_model(task_id, "m1", pools.take("ambiguous", 4), MATCHED_PAD_PER_MODEL)])

    # 55 tasks with both error types, two models each.
    # f027: the interaction model needing both corrections to pass.
    fail_task(
        "f027",
        [
            _model("f027", "m1", pools.take("fp", 3) + pools.take("gt", 2), MATCHED_PAD_PER_MODEL),
            _model("f027", "m2", pools.take("agent", 5), MATCHED_PAD_PER_MODEL),
        ],
    )
    # f028..f036: false-positive-only models beside agent models.
    for i in range(9):
        task_id = f"f{28 + i:03d}"
        fail_task(
            task_id,
            [
                _model(task_id, "m1", pools.take("fp", 4), MATCHED_PAD_PER_MODEL),
                _model(task_id, "m2", pools.take("agent", 5), MATCHED_PAD_PER_MODEL),
            ],
        )
    # f037..f055: one ground-truth error column inside otherwise agent models.
    for i in range(19):
        task_id = f"f{37 + i:03d}"
        fail_task(
            task_id,
            [
                _model(
                    task_id, "m1", pools.take("gt", 1) + pools.take("agent", 4), MATCHED_PAD_PER_MODEL
                ),
                _model(task_id, "m2", pools.take("agent", 5), MATCHED_PAD_PER_MODEL),
            ],
        )
    # f056..f081: mixed benchmark models (never pure FP) beside agent models.
    for i in range(26):
        task_id = f"f{56 + i:03d}"
        bench_width = 5 if i < 13 else 4
        bench = pools.take("agent", 1) + pools.take("fp", min(bench_width, len(pools.fp)))
        short = bench_width - (len(bench) - 1)
        if short > 0:
            bench += pools.take("ambiguous", short)
        agent_width = 5 if i < 7 else 4
        fail_task(
            task_id,
            [
                _model(task_id, "m1", bench, MATCHED_PAD_PER_MODEL),
                _model(task_id, "m2", pools.take("agent", agent_width), MATCHED_PAD_PER_MODEL),
            ],
        )

    tasks.extend(fail_tasks)
    fixture = StudyFixture(tuple(tasks))
    _assert_study_invariants(fixture, pools)
    return fixture


def _assert_study_invariants(fixture: StudyFixture, pools: _Pools) -> None:
    for name in ("agent", "fp", "ambiguous", "gt"):
        leftover = getattr(pools, name)
        assert not leftover, f"pool '{name}' has {len(leftover)} undealt labels"
    tasks = fixture.tasks
    assert len(tasks) == 100
    models = [m for t in tasks for m in t.models]
    assert len(models) == 203
    columns = fixture.all_columns()
    assert len(columns) == 2494
    unmatched = fixture.unmatched()
    assert len(unmatched) == 660
    fail_tasks = [t for t in tasks if t.kind == "fail"]
    assert len(fail_tasks) == 81
    assert sum(len(t.models) for t in fail_tasks) == 136
    for t in fail_tasks:
        for m in t.models:
            assert any(c.outcome != MATCHED for c in m.columns)
    gt_cols = fixture.gt_error_columns()
    assert len(gt_cols) == 30
    assert len({c.task_id for c in gt_cols}) == 24
    eligible = [
        c
        for t in tasks
        if t.kind in ("pass", "fail")
        for m in t.models
        for c in m.columns
        if c.leaf is not ErrorLeaf.GT_CALCULATION_ERROR
    ]
    assert len(eligible) == 2202


def _passes(column: PlannedColumn, script: str) -> bool:
    if column.outcome == MATCHED:
        return True
    if script == "patched" and column.leaf.is_false_positive:
        return True
    return False


def study_verdicts(
    fixture: StudyFixture,
    script: str = "original",
    remove_gt_columns: bool = False,
) -> list[TaskVerdict]:
    """Render the fixture as task verdicts under one evaluation variant.

    script is "original" or "patched"; remove_gt_columns drops the
    ground-truth error columns from evaluation while keeping every data
    model in the denominator.
    """
    if script not in ("original", "patched"):
        raise ValueError(f"unknown script variant '{script}'")
    verdicts = []
    for task in fixture.tasks:
        if task.kind == "extraction_failed":
            verdicts.append(
                TaskVerdict(
                    task.task_id, False, (), FailureClass.EXTRACTION_FAILURE, len(task.models)
                )
            )
            continue
        if task.kind == "schema_error":
            model_verdicts = tuple(
                ModelVerdict(m.model_name, (), passed=False, table_missing=True)
                for m in task.models
            )
            verdicts.append(
                TaskVerdict(
                    task.task_id, True, model_verdicts, FailureClass.SCHEMA_ERROR, len(task.models)
                )
            )
            continue
        model_verdicts = []
        for model in task.models:
            column_verdicts = []
            for column in model.columns:
                if remove_gt_columns and column.leaf is ErrorLeaf.GT_CALCULATION_ERROR:
                    continue
                matched = _passes(column, script)
                column_verdicts.append(
                    ColumnVerdict(
                        column=column.column,
                        matched=matched,
                        match_rate=1.0 if matched else 0.0,
                        evidence=() if matched else (("0", "gt-value", "pred-value"),),
                    )
                )
            model_verdicts.append(
                ModelVerdict(
                    model.model_name,
                    tuple(column_verdicts),
                    passed=all(cv.matched for cv in column_verdicts),
                )
            )
        failure = (
            FailureClass.NONE
            if all(m.passed for m in model_verdicts)
            else FailureClass.COLUMN_MISMATCH
        )
        verdicts.append(
            TaskVerdict(task.task_id, True, tuple(model_verdicts), failure, len(task.models))
        )
    return verdicts


def study_ledger(fixture: StudyFixture) -> ClassificationLedger:
    """The primary reviewer's full classification of the 660 columns."""
    unmatched = fixture.unmatched()
    ledger = ClassificationLedger(c.column_id for c in unmatched)
    for column in unmatched:
        ledger.record(
            column.column_id,
            column.leaf,
            reviewer="primary",
            source_report=f"report:{column.column_id.key()}",
            timestamp="2000-01-01T00:00:00+00:00",
        )
    return ledger


def study_strata_input(fixture: StudyFixture) -> tuple[list[tuple[str, bool, bool]], set[str]]:
    """(column verdict pairs, exclusion ids) for the stratification study.

    Exclusions are the columns of extraction-failed and schema-error tasks
    plus the ground-truth error columns, mirroring the filtering that
    isolates the script-refinement effect.
    """
    columns = []
    exclusions: set[str] = set()
    for task in fixture.tasks:
        for model in task.models:
            for column in model.columns:
                cid = column.column_id.key()
                if task.kind in ("extraction_failed", "schema_error"):
                    columns.append((cid, False, False))
                    exclusions.add(cid)
                    continue
                original = _passes(column, "original")
                patched = _passes(column, "patched")
                columns.append((cid, original, patched))
                if column.leaf is ErrorLeaf.GT_CALCULATION_ERROR:
                    exclusions.add(cid)
    return columns, exclusions


# ---------------------------------------------------------------------------
# Mini benchmark: a real on-disk bundle with known-planted mismatches.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MiniBenchmark:
    root: Path
    models_total: int
    expected_passes: dict  # variant -> set of "task/model"
    gt_error_columns: tuple[ColumnId, ...]
    fp_columns: tuple[ColumnId, ...]
    planted_chains: dict  # "task/model/column" -> list of transform labels


def _write_model(
    task_dir: Path,
    spec: DataModelSpec,
    gt_rows: dict[str, list[str]],
    pred_rows: dict[str, list[str]] | None,
) -> None:
    import csv as _csv
    import io as _io

    def render(rows: dict[str, list[str]]) -> str:
        names = list(rows)
        out = _io.StringIO()
        writer = _csv.writer(out, lineterminator="\n")
        writer.writerow(names)
        for i in range(len(rows[names[0]])):
            writer.writerow([rows[n][i] for n in names])
        return out.getvalue()

    (task_dir / "gt").mkdir(parents=True, exist_ok=True)
    (task_dir / "gt" / f"{spec.model_name}.csv").write_text(
        render(gt_rows), encoding="utf-8"
    )
    if pred_rows is not None:
        (task_dir / "predicted").mkdir(parents=True, exist_ok=True)
        (task_dir / "predicted" / f"{spec.model_name}.csv").write_text(
            render(pred_rows), encoding="utf-8"
        )
        (task_dir / "predicted" / f"{spec.model_name}.sql").write_text(
            f"-- synthesized transformation for {spec.model_name}\n"
            f"SELECT * FROM staging_{spec.model_name};\n",
            encoding="utf-8",
        )


def build_mini_benchmark(dest: Path | str, seed: int = 7) -> MiniBenchmark:
    """Materialize a 10-task bundle with planted outcomes.

    Plants: uniform 100x scale, boolean representation, row ordering, NULL
    vs zero, and float-noise false positives (each fixable by the verified
    semantics); two near-perfect ground-truth corruptions (fixable only by
    column removal, one of them inside a model that also needs the script
    fix); and two genuinely wrong agent outputs that nothing corrects.
    """
    rng = random.Random(seed)
    root = Path(dest)
    tasks_root = root / "tasks"
    tasks_root.mkdir(parents=True, exist_ok=True)

    expected = {
        "original": set(),
        "script_only": set(),
        "removal_only": set(),
        "both": set(),
    }
    gt_error_columns: list[ColumnId] = []
    fp_columns: list[ColumnId] = []
    planted: dict[str, list[str]] = {}
    models_total = 0

    def spec_for(task_id: str, model: str, columns: list[tuple[str, str]], **kwargs) -> DataModelSpec:
        return DataModelSpec(
            model_name=model,
            columns=tuple(ColumnSpec(name, desc) for name, desc in columns),
            **kwargs,
        )

    def write_task(task_id: str, specs_and_tables: list) -> None:
        nonlocal models_total
        task_dir = tasks_root / task_id
        task_dir.mkdir(parents=True, exist_ok=True)
        (task_dir / "data_model.yaml").write_text(
            dump_data_model_specs([s for s, _, _ in specs_and_tables]), encoding="utf-8"
        )
        for spec, gt_rows, pred_rows in specs_and_tables:
            _write_model(task_dir, spec, gt_rows, pred_rows)
            models_total += 1

    def keys(n: int) -> list[str]:
        return [str(1000 + i) for i in range(n)]

    # t01: one clean model plus a percent-scale false positive; live
    # extraction artifacts exercise the source/staging comparison.
    n = 8
    ids = keys(n)
    rates = [round(rng.uniform(-20.0, 30.0), 2) or 1.25 for _ in range(n)]
    spec_clean = spec_for("t01", "totals", [("id", "row key"), ("amount", "total amount")])
    amounts = [str(rng.randint(10, 500)) for _ in range(n)]
    spec_scale = spec_for(
        "t01", "growth", [("id", "row key"), ("growth_rate", "the growth rate")]
    )
    write_task(
        "t01",
        [
            (spec_clean, {"id": ids, "amount": amounts}, {"id": ids, "amount": amounts}),
            (
                spec_scale,
                {"id": ids, "growth_rate": [f"{r:.2f}" for r in rates]},
                {"id": ids, "growth_rate": [repr(r / 100) for r in rates]},
            ),
        ],
    )
    src = tasks_root / "t01" / "sources"
    stage = tasks_root / "t01" / "staging"
    for d in (src, stage):
        d.mkdir(exist_ok=True)
        (d / "raw_totals.csv").write_text(
            "id,amount\n" + "\n".join(f"{i},{a}" for i, a in zip(ids, amounts)) + "\n",
            encoding="utf-8",
        )
    expected["original"].add("t01/totals")
    fp_columns.append(ColumnId("t01", "growth", "growth_rate"))
    planted["t01/growth/growth_rate"] = ["scale(100.0)"]

    # t02: boolean-representation false positive beside a flawed agent model.
    n = 8
    ids = keys(n)
    flags = [rng.choice(["true", "false"]) for _ in range(n)]
    spec_bool = spec_for("t02", "flags", [("id", "row key"), ("is_active", "active flag")])
    spec_agent = spec_for("t02", "scores", [("id", "row key"), ("score", "points earned")])
    gt_scores = [str(rng.randint(1, 50)) for _ in range(n)]
    pred_scores = [
        s if i < 3 else str(int(s) + rng.randint(1, 9)) for i, s in enumerate(gt_scores)
    ]
    write_task(
        "t02",
        [
            (
                spec_bool,
                {"id": ids, "is_active": flags},
                {"id": ids, "is_active": ["1" if f == "true" else "0" for f in flags]},
            ),
            (spec_agent, {"id": ids, "score": gt_scores}, {"id": ids, "score": pred_scores}),
        ],
    )
    fp_columns.append(ColumnId("t02", "flags", "is_active"))
    planted["t02/flags/is_active"] = ["bool_remap"]

    # t03: row-ordering false positive (distinct values, shuffled output).
    n = 8
    ids = keys(n)
    values = rng.sample(range(100, 900), n)
    order = list(range(n))
    while order == sorted(order):
        rng.shuffle(order)
    spec_order = spec_for("t03", "ranking", [("team", "team name"), ("points", "points total")])
    write_task(
        "t03",
        [
            (
                spec_order,
                {"team": [f"team_{i}" for i in range(n)], "points": [str(v) for v in values]},
                {
                    "team": [f"team_{order[i]}" for i in range(n)],
                    "points": [str(values[order[i]]) for i in range(n)],
                },
            )
        ],
    )
    fp_columns.append(ColumnId("t03", "ranking", "team"))
    fp_columns.append(ColumnId("t03", "ranking", "points"))
    planted["t03/ranking/points"] = ["reorder_to_multiset"]

    # t04: NULL-representation false positive: spec is silent, agent wrote 0.
    n = 8
    ids = keys(n)
    nullable = [
        "" if i % 3 == 0 else str(rng.randint(5, 99)) for i in range(n)
    ]
    spec_null = spec_for("t04", "balance", [("id", "row key"), ("credit", "credit owed")])
    write_task(
        "t04",
        [
            (
                spec_null,
                {"id": ids, "credit": nullable},
                {"id": ids, "credit": [v if v else "0" for v in nullable]},
            )
        ],
    )
    fp_columns.append(ColumnId("t04", "balance", "credit"))
    planted["t04/balance/credit"] = ["zero_to_null"]

    # t05: ground-truth corruption: one anomalous row out of 150.
    n = 150
    ids = keys(n)
    true_values = [str(rng.randint(1, 999)) for _ in range(n)]
    corrupted = list(true_values)
    corrupted[n // 2] = str(int(corrupted[n // 2]) + 100000)
    spec_gt_err = spec_for("t05", "stats", [("id", "row key"), ("visits", "visit count")])
    write_task(
        "t05",
        [
            (
                spec_gt_err,
                {"id": ids, "visits": corrupted},
                {"id": ids, "visits": true_values},
            )
        ],
    )
    gt_error_columns.append(ColumnId("t05", "stats", "visits"))

    # t06: needs both corrections: a scaled column plus a corrupted column.
    n = 150
    ids = keys(n)
    pcts = [round(rng.uniform(1.0, 99.0), 2) for _ in range(n)]
    shares = [str(rng.randint(1, 999)) for _ in range(n)]
    bad_shares = list(shares)
    bad_shares[3] = str(int(bad_shares[3]) + 77777)
    spec_mixed = spec_for(
        "t06",
        "report",
        [("id", "row key"), ("pct", "percentage of total"), ("share", "share count")],
    )
    write_task(
        "t06",
        [
            (
                spec_mixed,
                {"id": ids, "pct": [f"{p:.2f}" for p in pcts], "share": bad_shares},
                {"id": ids, "pct": [repr(p / 100) for p in pcts], "share": shares},
            )
        ],
    )
    gt_error_columns.append(ColumnId("t06", "report", "share"))
    fp_columns.append(ColumnId("t06", "report", "pct"))
    planted["t06/report/pct"] = ["scale(100.0)"]

    # t07: agent picked the wrong interpretation; roughly 40% agreement.
    n = 10
    ids = keys(n)
    gt_won = [str(rng.randint(0, 20)) for _ in range(n)]
    pred_won = [v if i < 4 else str(int(v) + i) for i, v in enumerate(gt_won)]
    spec_a1 = spec_for("t07", "season", [("id", "row key"), ("num_won", "matches won")])
    write_task(
        "t07", [(spec_a1, {"id": ids, "num_won": gt_won}, {"id": ids, "num_won": pred_won})]
    )

    # t08: clean model plus float representation noise inside tolerance.
    n = 8
    ids = keys(n)
    bases = [round(rng.uniform(1.0, 9.0), 6) for _ in range(n)]
    spec_clean2 = spec_for("t08", "labels", [("id", "row key"), ("name", "label text")])
    names = [f"label_{i}" for i in range(n)]
    spec_noise = spec_for("t08", "ratios", [("id", "row key"), ("ratio", "ratio value")])
    write_task(
        "t08",
        [
            (spec_clean2, {"id": ids, "name": names}, {"id": ids, "name": names}),
            (
                spec_noise,
                {"id": ids, "ratio": [repr(b) for b in bases]},
                {"id": ids, "ratio": [repr(b + 1e-9) for b in bases]},
            ),
        ],
    )
    expected["original"].add("t08/labels")
    fp_columns.append(ColumnId("t08", "ratios", "ratio"))
    planted["t08/ratios/ratio"] = ["identity"]

    # t09: extraction failed; the model is never evaluated but still counts.
    spec_e = spec_for("t09", "orders", [("id", "row key"), ("total", "order total")])
    write_task(
        "t09",
        [(spec_e, {"id": ["1"], "total": ["10"]}, {"id": ["1"], "total": ["10"]})],
    )

    # t10: schema error: one model's predicted table never materialized.
    n = 6
    ids = keys(n)
    spec_missing = spec_for("t10", "summary", [("id", "row key"), ("value", "value")])
    spec_bad = spec_for("t10", "detail", [("id", "row key"), ("count", "row count")])
    gt_counts = [str(rng.randint(1, 9)) for _ in range(n)]
    write_task(
        "t10",
        [
            (spec_missing, {"id": ids, "value": gt_counts}, None),
            (
                spec_bad,
                {"id": ids, "count": gt_counts},
                {"id": ids, "count": [str(int(v) + 1) for v in gt_counts]},
            ),
        ],
    )

    (root / "el_outcomes.json").write_text(
        json.dumps({f"t{i:02d}": (i != 9) for i in range(1, 11)}, indent=2),
        encoding="utf-8",
    )

    script_fixed = {
        "t01/growth", "t02/flags", "t03/ranking", "t04/balance", "t08/ratios"
    }
    removal_fixed = {"t05/stats"}
    both_only = {"t06/report"}
    expected["script_only"] = expected["original"] | script_fixed
    expected["removal_only"] = expected["original"] | removal_fixed
    expected["both"] = expected["original"] | script_fixed | removal_fixed | both_only

    return MiniBenchmark(
        root=root,
        models_total=models_total,
        expected_passes=expected,
        gt_error_columns=tuple(gt_error_columns),
        fp_columns=tuple(fp_columns),
        planted_chains=planted,
    )


def materialize_study_bundle(fixture: StudyFixture, dest: Path | str) -> Path:
    """Write the study fixture as an on-disk bundle: per-task spec files and
    ground-truth tables (three deterministic rows per model), plus recorded
    extraction outcomes.  Predicted artifacts are not materialized; the
    bundle exists to exercise ground-truth surgery at full scale."""
    root = Path(dest)
    tasks_root = root / "tasks"
    tasks_root.mkdir(parents=True, exist_ok=True)
    outcomes = {}
    for task in fixture.tasks:
        outcomes[task.task_id] = task.kind != "extraction_failed"
        task_dir = tasks_root / task.task_id
        task_dir.mkdir(parents=True, exist_ok=True)
        specs = []
        for model in task.models:
            spec = DataModelSpec(
                model_name=model.model_name,
                columns=tuple(
                    ColumnSpec(c.column, f"value of {c.column}") for c in model.columns
                ),
            )
            specs.append(spec)
            rows = {
                c.column: [str(100 + i) for i in range(3)] for c in model.columns
            }
            _write_model(task_dir, spec, rows, None)
        (task_dir / "data_model.yaml").write_text(
            dump_data_model_specs(specs), encoding="utf-8"
        )
    (root / "el_outcomes.json").write_text(json.dumps(outcomes), encoding="utf-8")
    return root


def build_scale_fixture(dest: Path | str) -> Path:
    """A single-task bundle holding the five-country growth-rate pair whose
    predictions are an exact 100x rescaling of the ground truth."""
    root = Path(dest)
    task_dir = root / "tasks" / "world"
    task_dir.mkdir(parents=True, exist_ok=True)
    spec = DataModelSpec(
        model_name="country_growth",
        columns=(
            ColumnSpec("country", "country name"),
            ColumnSpec("gnp_growth_rate", "The GNP growth rate of the country."),
        ),
    )
    (task_dir / "data_model.yaml").write_text(
        dump_data_model_specs([spec]), encoding="utf-8"
    )
    countries = ["Aruba", "Angola", "Albania", "UAE", "Argentina"]
    gt_values = ["4.41", "-16.73", "28.20", "3.04", "5.24"]
    pred_values = ["0.0441", "-0.1673", "0.2820", "0.0304", "0.0524"]
    _write_model(
        task_dir,
        spec,
        {"country": countries, "gnp_growth_rate": gt_values},
        {"country": countries, "gnp_growth_rate": pred_values},
    )
    return root
