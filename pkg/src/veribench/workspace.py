"""Audit preparation: the unmatched-column work queue and per-task
analysis environments.

Environments are hermetic copies of the relevant artifacts, never links,
so downstream analysis cannot mutate the bundle and re-materialization is
reproducible digest for digest.
"""
from __future__ import annotations

import hashlib
import json
import shutil
from dataclasses import dataclass
from pathlib import Path

from .errors import BundleError, UsageError
from .evaluator import FailureClass, TaskVerdict, parse_eval_log
from .tabular import (
    DataModelSpec,
    TableArtifact,
    TaskSpec,
    dump_data_model_specs,
    find_spec_file,
    load_data_model_specs,
    load_table_file,
)


@dataclass(frozen=True)
class WorkItem:
    """One (task, model) pair with its unmatched columns."""

    task_id: str
    model_name: str
    columns: tuple[str, ...]


@dataclass(frozen=True)
class AuditEnvironment:
    task_id: str
    root: Path
    manifest: tuple[tuple[str, str], ...]  # (relative path, sha256)

    def spec_path(self) -> Path:
        return find_spec_file(self.root)

    def models(self) -> list[DataModelSpec]:
        return load_data_model_specs(self.spec_path())

    def gt_table(self, model_name: str, tokens=None) -> TableArtifact:
        return load_table_file(self.root / "gt" / f"{model_name}.csv", tokens=tokens)

    def predicted_table(self, model_name: str, tokens=None) -> TableArtifact:
        path = self.root / "predicted" / f"{model_name}.csv"
        if not path.exists():
            raise BundleError(f"environment '{self.task_id}' has no predicted table "
                              f"for model '{model_name}'")
        return load_table_file(path, tokens=tokens)


def build_work_queue(log: bytes | str | list[TaskVerdict]) -> list[WorkItem]:
    """One WorkItem per (task, model) with unmatched columns.

    Tasks that failed extraction or hit schema errors are excluded: they
    produced nothing to diagnose.  Ordering is task id then model name so
    parallel dispatch is reproducible.
    """
    verdicts = log if isinstance(log, list) else parse_eval_log(log)
    items = []
    for verdict in verdicts:
        if verdict.failure_class in (
            FailureClass.EXTRACTION_FAILURE,
            FailureClass.SCHEMA_ERROR,
        ):
            continue
        for model in verdict.model_verdicts:
            unmatched = tuple(
                cv.column for cv in model.column_verdicts if not cv.matched
            )
            if unmatched:
                items.append(WorkItem(verdict.task_id, model.model_name, unmatched))
    return sorted(items, key=lambda w: (w.task_id, w.model_name))


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def materialize_environment(
    task: TaskSpec, queue: list[WorkItem], dest_root: Path | str
) -> AuditEnvironment:
    """Build the analysis environment for one task.

    Only data models with at least one unmatched column are copied in; the
    spec file is filtered to those models.  A manifest of content digests is
    written alongside so hermeticity can be verified later.
    """
    items = [w for w in queue if w.task_id == task.task_id]
    if not items:
        raise UsageError(f"task '{task.task_id}' has no work items")
    affected = [w.model_name for w in items]

    root = Path(dest_root) / task.task_id
    root.mkdir(parents=True, exist_ok=True)
    (root / "gt").mkdir(exist_ok=True)
    (root / "predicted").mkdir(exist_ok=True)

    specs = [task.model(name) for name in affected]
    (root / "data_model.yaml").write_text(dump_data_model_specs(specs), encoding="utf-8")

    for name in affected:
        gt_src = task.gt_path(name)
        pred_src = task.predicted_csv_path(name)
        for src in (gt_src, pred_src):
            if not src.exists():
                raise BundleError(
                    f"task '{task.task_id}' is missing artifact '{src}'"
                )
        shutil.copyfile(gt_src, root / "gt" / gt_src.name)
        shutil.copyfile(pred_src, root / "predicted" / pred_src.name)
        sql_src = task.predicted_sql_path(name)
        if sql_src.exists():
            shutil.copyfile(sql_src, root / "predicted" / sql_src.name)

    sources_dir = task.artifact_paths.get("sources")
    if sources_dir:
        (root / "sources").mkdir(exist_ok=True)
        for src in sorted(Path(sources_dir).glob("*")):
            if src.is_file():
                shutil.copyfile(src, root / "sources" / src.name)

    manifest = tuple(
        (str(p.relative_to(root)), _sha256(p))
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    )
    (root / "manifest.json").write_text(
        json.dumps([{"path": p, "sha256": d} for p, d in manifest], indent=2),
        encoding="utf-8",
    )
    return AuditEnvironment(task.task_id, root, manifest)


def open_environment(env_root: Path | str, task_id: str) -> AuditEnvironment:
    """Load an existing environment and verify its manifest digests."""
    root = Path(env_root) / task_id
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise BundleError(f"no manifest in environment '{root}'")
    entries = json.loads(manifest_path.read_text(encoding="utf-8"))
    manifest = []
    for entry in entries:
        path = root / entry["path"]
        if not path.exists():
            raise BundleError(f"environment file '{path}' listed in manifest is missing")
        actual = _sha256(path)
        if actual != entry["sha256"]:
            raise BundleError(
                f"environment file '{path}' digest mismatch: "
                f"{actual} != {entry['sha256']}"
            )
        manifest.append((entry["path"], entry["sha256"]))
    return AuditEnvironment(task_id, root, tuple(manifest))
