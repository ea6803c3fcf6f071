"""Translate a classified ledger into benchmark refinements.

Corrections are data, never code edits: an evaluation-config patch derived
from the false-positive evidence, a ground-truth column-removal manifest
for columns whose values proved underivable, and a corrected bundle that
embeds both.  Agent-attributable findings produce no change at all, and
ambiguous-description columns are preserved byte for byte.
"""
from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, replace
from pathlib import Path

from .equivalence import EvalConfig, NullZeroRule, PRESETS
from .errors import BundleError, ConsistencyError, LedgerReferenceError, PolicyError
from .tabular import (
    DataModelSpec,
    TableArtifact,
    dump_data_model_specs,
    find_spec_file,
    load_data_model_specs,
    load_table_file,
    write_table_csv,
)
from .taxonomy import ClassificationLedger, ErrorLeaf


@dataclass(frozen=True)
class EvalPatch:
    """Evaluation-config refinement derived from one ledger snapshot."""

    config: EvalConfig
    manual_review: tuple[str, ...]  # FP subleaves needing human follow-up
    ledger_digest: str


@dataclass(frozen=True)
class RemovedColumn:
    task_id: str
    model_name: str
    column: str
    justification: str  # digest of the source analysis report

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "model_name": self.model_name,
            "column": self.column,
            "justification": self.justification,
        }


@dataclass(frozen=True)
class CorrectionManifest:
    eval_config: EvalConfig
    removed_columns: tuple[RemovedColumn, ...]
    preserved_ambiguous: tuple[str, ...]  # column id keys, byte-identical in output
    benchmark_version: str
    columns_total: int
    columns_removed: int
    models_total: int
    ledger_digest: str

    def to_dict(self) -> dict:
        return {
            "benchmark_version": self.benchmark_version,
            "eval_config": json.loads(self.eval_config.to_json()),
            "removed_columns": [r.to_dict() for r in self.removed_columns],
            "preserved_ambiguous": list(self.preserved_ambiguous),
            "counts": {
                "columns_total": self.columns_total,
                "columns_removed": self.columns_removed,
                "models_total": self.models_total,
            },
            "ledger_digest": self.ledger_digest,
        }

    @property
    def removed_fraction(self) -> float:
        return self.columns_removed / self.columns_total if self.columns_total else 0.0


def derive_eval_patch(ledger: ClassificationLedger) -> EvalPatch:
    """Enable each verified-mode rule family iff the ledger contains the
    false-positive subleaf it corrects.

    actual_match turns on the float tolerances and boolean normalization;
    format_mismatch turns on percent-scale detection; null_representation
    turns on NULL<->0 equivalence; row_ordering makes comparison
    order-insensitive by default.  duplicated_gt_rows and other cannot be
    fixed by configuration and are flagged for manual review instead.  A
    ledger without any of the four actionable subleaves yields the strict
    legacy document unchanged.
    """
    present = {e.category for e in ledger.entries.values()}
    verified = PRESETS["verified-v1"]
    manual = tuple(
        sorted(
            leaf.value
            for leaf in (ErrorLeaf.FP_OTHER, ErrorLeaf.FP_DUPLICATED_GT_ROWS)
            if leaf in present
        )
    )
    enable_tolerance = ErrorLeaf.FP_ACTUAL_MATCH in present
    enable_scale = ErrorLeaf.FP_FORMAT_MISMATCH in present
    enable_null = ErrorLeaf.FP_NULL_REPRESENTATION in present
    enable_order = ErrorLeaf.FP_ROW_ORDERING in present

    if not (enable_tolerance or enable_scale or enable_null or enable_order):
        return EvalPatch(PRESETS["legacy"], manual, ledger.digest())

    config = replace(
        verified,
        abs_tol=verified.abs_tol if enable_tolerance else 0.0,
        rel_tol=verified.rel_tol if enable_tolerance else 0.0,
        bool_normalization=enable_tolerance,
        percent_scale=replace(verified.percent_scale, enabled=enable_scale),
        null_zero_equivalence=(
            NullZeroRule.WHEN_SPEC_SILENT if enable_null else NullZeroRule.NEVER
        ),
        order_insensitive_default=enable_order,
    )
    return EvalPatch(config, manual, ledger.digest())


def patch_from_preset(name: str, ledger: ClassificationLedger) -> EvalPatch:
    """An EvalPatch pinning a named preset to the ledger snapshot (used for
    ablation bundles that keep the original script)."""
    return EvalPatch(EvalConfig.preset(name), (), ledger.digest())


def plan_removals(ledger: ClassificationLedger) -> list[RemovedColumn]:
    return sorted(
        (
            RemovedColumn(
                entry.column.task_id,
                entry.column.model_name,
                entry.column.column,
                entry.source_report,
            )
            for entry in ledger.entries.values()
            if entry.category is ErrorLeaf.GT_CALCULATION_ERROR
        ),
        key=lambda r: (r.task_id, r.model_name, r.column),
    )


def _bundle_census(bundle_root: Path) -> tuple[int, int]:
    """(total ground-truth columns, total data models) across the bundle."""
    columns = models = 0
    tasks_dir = bundle_root / "tasks"
    if not tasks_dir.is_dir():
        raise BundleError(f"bundle '{bundle_root}' has no tasks/ directory")
    for task_dir in sorted(tasks_dir.iterdir()):
        if not task_dir.is_dir():
            continue
        for spec in load_data_model_specs(find_spec_file(task_dir)):
            models += 1
            columns += len(spec.columns)
    return columns, models


def _drop_columns(table: TableArtifact, names: set[str]) -> TableArtifact:
    kept = tuple(c for c in table.columns if c.name not in names)
    return TableArtifact(table.model_name, kept, table.row_count)


def _apply_removals(
    bundle_root: Path, dest_root: Path, removals: list[RemovedColumn]
) -> None:
    """Copy the bundle and rewrite ground truth and specs without the
    removed columns.  Refuses any removal that would empty a data model."""
    if dest_root.exists():
        shutil.rmtree(dest_root)
    shutil.copytree(bundle_root, dest_root)

    by_task_model: dict[tuple[str, str], set[str]] = {}
    for removal in removals:
        by_task_model.setdefault((removal.task_id, removal.model_name), set()).add(
            removal.column
        )

    for (task_id, model_name), columns in sorted(by_task_model.items()):
        task_dir = dest_root / "tasks" / task_id
        if not task_dir.is_dir():
            raise LedgerReferenceError(
                f"removal references unknown task '{task_id}'"
            )
        spec_file = find_spec_file(task_dir)
        specs = load_data_model_specs(spec_file)
        by_name = {s.model_name: s for s in specs}
        if model_name not in by_name:
            raise LedgerReferenceError(
                f"removal references unknown model '{task_id}/{model_name}'"
            )
        spec = by_name[model_name]
        spec_columns = {c.name for c in spec.columns}
        unknown = columns - spec_columns
        if unknown:
            raise LedgerReferenceError(
                f"removal references unknown columns {sorted(unknown)} "
                f"in '{task_id}/{model_name}'"
            )
        remaining = [c for c in spec.columns if c.name not in columns]
        if not remaining:
            raise PolicyError(
                f"removing {sorted(columns)} would leave data model "
                f"'{task_id}/{model_name}' with zero columns"
            )
        by_name[model_name] = DataModelSpec(
            model_name=spec.model_name,
            columns=tuple(remaining),
            order_sensitive=spec.order_sensitive,
            key_columns=tuple(
                k for k in (spec.key_columns or ()) if k not in columns
            )
            or None,
        )
        new_specs = [by_name[s.model_name] for s in specs]
        spec_file.write_text(dump_data_model_specs(new_specs), encoding="utf-8")

        gt_path = task_dir / "gt" / f"{model_name}.csv"
        if not gt_path.exists():
            raise BundleError(f"bundle has no ground truth at '{gt_path}'")
        table = load_table_file(gt_path, model_name=model_name)
        missing = columns - set(table.column_names)
        if missing:
            raise LedgerReferenceError(
                f"ground truth '{gt_path}' lacks columns {sorted(missing)}"
            )
        gt_path.write_text(write_table_csv(_drop_columns(table, columns)), encoding="utf-8")


def build_manifest(
    bundle_root: Path | str,
    ledger: ClassificationLedger,
    benchmark_version: str = "verified",
    eval_config: EvalConfig | None = None,
    include_removals: bool = True,
) -> CorrectionManifest:
    """Plan the correction without writing anything.  With include_removals
    off the manifest records zero removals (the script-only ablation)."""
    columns_total, models_total = _bundle_census(Path(bundle_root))
    removals = plan_removals(ledger) if include_removals else []
    preserved = tuple(
        sorted(
            entry.column.key()
            for entry in ledger.entries.values()
            if entry.category is ErrorLeaf.AMBIGUOUS_DESCRIPTION
        )
    )
    return CorrectionManifest(
        eval_config=eval_config or PRESETS["verified-v1"],
        removed_columns=tuple(removals),
        preserved_ambiguous=preserved,
        benchmark_version=benchmark_version,
        columns_total=columns_total,
        columns_removed=len(removals),
        models_total=models_total,
        ledger_digest=ledger.digest(),
    )


def remove_gt_columns(
    bundle_root: Path | str,
    ledger: ClassificationLedger,
    dest_root: Path | str,
    benchmark_version: str = "verified",
    eval_config: EvalConfig | None = None,
) -> CorrectionManifest:
    """Rewrite the bundle at dest_root without the ledger's ground-truth
    calculation error columns and report what changed.

    Data-model coverage is never reduced: a removal that would empty a
    model is a policy error, and the model census is taken before and after
    to prove it did not shrink.
    """
    bundle_root, dest_root = Path(bundle_root), Path(dest_root)
    manifest = build_manifest(bundle_root, ledger, benchmark_version, eval_config)
    _apply_removals(bundle_root, dest_root, list(manifest.removed_columns))
    _, models_after = _bundle_census(dest_root)
    if models_after != manifest.models_total:
        raise PolicyError(
            f"model count changed during removal: "
            f"{manifest.models_total} -> {models_after}"
        )
    return manifest


def emit_verified_bundle(
    bundle_root: Path | str,
    patch: EvalPatch,
    manifest: CorrectionManifest,
    version: str,
    dest_root: Path | str,
) -> Path:
    """Write the corrected bundle: source layout minus removed columns,
    plus manifest.json and eval_config.json at the root.

    The patch and manifest must come from the same ledger snapshot; the
    digests embedded in both are compared before anything is written.
    """
    if patch.ledger_digest != manifest.ledger_digest:
        raise ConsistencyError(
            "patch and manifest were derived from different ledger snapshots"
        )
    bundle_root, dest_root = Path(bundle_root), Path(dest_root)
    manifest = replace(
        manifest, eval_config=patch.config, benchmark_version=version
    )
    _apply_removals(bundle_root, dest_root, list(manifest.removed_columns))

    config_doc = json.loads(patch.config.to_json())
    config_doc["benchmark_version"] = version
    if patch.manual_review:
        config_doc["manual_review"] = list(patch.manual_review)
    (dest_root / "eval_config.json").write_text(
        json.dumps(config_doc, indent=2, sort_keys=True), encoding="utf-8"
    )
    (dest_root / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=2), encoding="utf-8"
    )
    return dest_root
