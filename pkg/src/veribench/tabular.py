"""Typed in-memory representation of benchmark tables and task bundles.

CSV artifacts are parsed cell by cell into a small value algebra
(null / bool / int / float / text).  Parsing is total and deterministic:
every raw string maps to exactly one variant under a given token
configuration, and the original text is always retained so that evidence
can be rendered verbatim.
"""
from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import yaml

from .errors import (
    BundleError,
    ColumnLookupError,
    ConfigError,
    TableParseError,
    TableSchemaError,
)

_INT_RE = re.compile(r"[+-]?[0-9]+")
# Decimal point only; no locale-dependent separators, no inf/nan literals.
_FLOAT_RE = re.compile(r"[+-]?([0-9]+\.?[0-9]*|\.[0-9]+)([eE][+-]?[0-9]+)?")

DEFAULT_NULL_TOKENS = frozenset({"", "null", "none", "nan"})
DEFAULT_TRUE_TOKENS = frozenset({"true"})
DEFAULT_FALSE_TOKENS = frozenset({"false"})


class CellKind(str, Enum):
    NULL = "null"
    BOOL = "bool"
    INT = "int"
    FLOAT = "float"
    TEXT = "text"


@dataclass(frozen=True, slots=True)
class TokenConfig:
    """Case-insensitive token sets driving cell parsing."""

    null_tokens: frozenset[str] = DEFAULT_NULL_TOKENS
    bool_true_tokens: frozenset[str] = DEFAULT_TRUE_TOKENS
    bool_false_tokens: frozenset[str] = DEFAULT_FALSE_TOKENS

    def __post_init__(self):
        sets = {
            "null_tokens": frozenset(t.casefold() for t in self.null_tokens),
            "bool_true_tokens": frozenset(t.casefold() for t in self.bool_true_tokens),
            "bool_false_tokens": frozenset(t.casefold() for t in self.bool_false_tokens),
        }
        for name, folded in sets.items():
            object.__setattr__(self, name, folded)
        names = list(sets)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                overlap = sets[a] & sets[b]
                if overlap:
                    raise ConfigError(
                        f"token sets {a} and {b} overlap after casefolding: {sorted(overlap)}"
                    )


@dataclass(frozen=True, slots=True)
class CellValue:
    """One parsed cell: a typed value plus the raw text it came from."""

    kind: CellKind
    value: bool | int | float | str | None
    raw: str

    def is_numeric(self) -> bool:
        return self.kind in (CellKind.INT, CellKind.FLOAT)

    @staticmethod
    def null(raw: str = "") -> "CellValue":
        return CellValue(CellKind.NULL, None, raw)

    @staticmethod
    def boolean(truth: bool, raw: str | None = None) -> "CellValue":
        return CellValue(CellKind.BOOL, truth, raw if raw is not None else str(truth).lower())

    @staticmethod
    def integer(value: int, raw: str | None = None) -> "CellValue":
        return CellValue(CellKind.INT, value, raw if raw is not None else str(value))

    @staticmethod
    def real(value: float, raw: str | None = None) -> "CellValue":
        return CellValue(CellKind.FLOAT, value, raw if raw is not None else format_number(value))

    @staticmethod
    def text(value: str) -> "CellValue":
        return CellValue(CellKind.TEXT, value, value)


def format_number(value: float) -> str:
    """Canonical shortest round-trip rendering for derived numeric cells."""
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def parse_cell(raw: str, tokens: TokenConfig | None = None) -> CellValue:
    """Parse one raw cell into its unique variant.

    Token membership is case-insensitive; numeric parsing accepts only a
    plain decimal-point syntax, so text values are never mangled.
    """
    tokens = tokens or TokenConfig()
    folded = raw.casefold()
    if folded in tokens.null_tokens:
        return CellValue(CellKind.NULL, None, raw)
    if folded in tokens.bool_true_tokens:
        return CellValue(CellKind.BOOL, True, raw)
    if folded in tokens.bool_false_tokens:
        return CellValue(CellKind.BOOL, False, raw)
    if _INT_RE.fullmatch(raw):
        return CellValue(CellKind.INT, int(raw), raw)
    if _FLOAT_RE.fullmatch(raw):
        return CellValue(CellKind.FLOAT, float(raw), raw)
    return CellValue(CellKind.TEXT, raw, raw)


@dataclass(frozen=True)
class ColumnSeries:
    """Named, ordered column of parsed cells."""

    name: str
    cells: tuple[CellValue, ...]

    @property
    def raw(self) -> tuple[str, ...]:
        return tuple(c.raw for c in self.cells)

    def __len__(self) -> int:
        return len(self.cells)


class NullDirective(str, Enum):
    PRESERVE_NULL = "preserve_null"
    REPLACE_WITH_ZERO = "replace_with_zero"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    description: str = ""
    null_directive: NullDirective | None = None


@dataclass(frozen=True)
class DataModelSpec:
    """Spec for one target data model: column names, descriptions, directives."""

    model_name: str
    columns: tuple[ColumnSpec, ...]
    order_sensitive: bool = False
    key_columns: tuple[str, ...] | None = None

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise TableSchemaError(f"duplicate column names in spec for '{self.model_name}'")
        if self.key_columns:
            missing = set(self.key_columns) - set(names)
            if missing:
                raise TableSchemaError(
                    f"key_columns not in spec for '{self.model_name}': {sorted(missing)}"
                )

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise ColumnLookupError(f"column '{name}' not in spec for '{self.model_name}'")

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "columns": [
                {
                    "name": c.name,
                    "description": c.description,
                    **(
                        {"null_directive": c.null_directive.value}
                        if c.null_directive
                        else {}
                    ),
                }
                for c in self.columns
            ],
            "order_sensitive": self.order_sensitive,
            **({"key_columns": list(self.key_columns)} if self.key_columns else {}),
        }


@dataclass(frozen=True)
class TableArtifact:
    """A materialized table: ordered columns of equal length."""

    model_name: str
    columns: tuple[ColumnSeries, ...]
    row_count: int
    _by_name: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise TableSchemaError(f"duplicate column names in table '{self.model_name}'")
        for col in self.columns:
            if len(col) != self.row_count:
                raise TableSchemaError(
                    f"column '{col.name}' has {len(col)} cells, expected {self.row_count}"
                )
        object.__setattr__(self, "_by_name", {c.name: c for c in self.columns})

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def has_column(self, name: str) -> bool:
        return name in self._by_name

    def rows_raw(self) -> list[tuple[str, ...]]:
        return [tuple(col.cells[i].raw for col in self.columns) for i in range(self.row_count)]


def project_column(table: TableArtifact, name: str) -> ColumnSeries:
    """Return the named series unchanged; unknown names list what exists."""
    series = table._by_name.get(name)
    if series is None:
        raise ColumnLookupError(
            f"column '{name}' not in table '{table.model_name}'; "
            f"available: {table.column_names}"
        )
    return series


def load_table(
    content: bytes | str,
    spec: DataModelSpec | None = None,
    tokens: TokenConfig | None = None,
    model_name: str | None = None,
) -> TableArtifact:
    """Parse RFC 4180 CSV content (UTF-8, header row) into a TableArtifact."""
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    reader = csv.reader(io.StringIO(content, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise TableParseError("CSV content has no header row") from None
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise TableSchemaError(f"duplicate header columns: {dupes}")
    cells_by_col: list[list[CellValue]] = [[] for _ in header]
    for row_index, row in enumerate(reader):
        if len(row) != len(header):
            raise TableParseError(
                f"row {row_index} has {len(row)} fields, expected {len(header)}"
            )
        for j, raw in enumerate(row):
            cells_by_col[j].append(parse_cell(raw, tokens))
    name = model_name or (spec.model_name if spec else "table")
    if spec is not None:
        present = set(header)
        for col_spec in spec.columns:
            if col_spec.name not in present:
                raise TableSchemaError(
                    f"table '{name}' is missing spec column '{col_spec.name}'"
                )
    columns = tuple(
        ColumnSeries(h, tuple(cells)) for h, cells in zip(header, cells_by_col)
    )
    return TableArtifact(name, columns, len(cells_by_col[0]) if header else 0)


def write_table_csv(table: TableArtifact) -> str:
    """Serialize back to CSV, preserving every cell's raw text verbatim."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(table.column_names)
    for row in table.rows_raw():
        writer.writerow(row)
    return out.getvalue()


def load_table_file(
    path: Path | str,
    spec: DataModelSpec | None = None,
    tokens: TokenConfig | None = None,
    model_name: str | None = None,
) -> TableArtifact:
    path = Path(path)
    try:
        content = path.read_bytes()
    except OSError as exc:
        raise BundleError(f"cannot read table file '{path}': {exc}") from exc
    name = model_name or path.stem
    return load_table(content, spec=spec, tokens=tokens, model_name=name)


def _column_spec_from_dict(entry: dict) -> ColumnSpec:
    directive = entry.get("null_directive")
    if directive is not None:
        directive = NullDirective(directive)
    return ColumnSpec(
        name=str(entry["name"]),
        description=str(entry.get("description", "")),
        null_directive=directive,
    )


def _model_spec_from_dict(doc: dict) -> DataModelSpec:
    key_cols = doc.get("key_columns")
    return DataModelSpec(
        model_name=str(doc["model_name"]),
        columns=tuple(_column_spec_from_dict(c) for c in doc.get("columns", [])),
        order_sensitive=bool(doc.get("order_sensitive", False)),
        key_columns=tuple(key_cols) if key_cols else None,
    )


def load_data_model_specs(content: str | Path) -> list[DataModelSpec]:
    """Read a data-model spec document (YAML): one mapping, a list, or
    {'data_models': [...]}."""
    if isinstance(content, Path):
        content = content.read_text(encoding="utf-8")
    doc = yaml.safe_load(content)
    if doc is None:
        return []
    if isinstance(doc, dict) and "data_models" in doc:
        doc = doc["data_models"]
    if isinstance(doc, dict):
        doc = [doc]
    if not isinstance(doc, list):
        raise TableSchemaError("data-model spec must be a mapping or a list of mappings")
    return [_model_spec_from_dict(d) for d in doc]


def dump_data_model_specs(specs: list[DataModelSpec]) -> str:
    return yaml.safe_dump([s.to_dict() for s in specs], sort_keys=False)


# Spec file naming drifted historically; both forms are accepted on read,
# the first is written.
SPEC_FILENAMES = ("data_model.yaml", "data_model_schema.yaml")


@dataclass(frozen=True)
class TaskSpec:
    """One benchmark task: its data models plus artifact locations by role."""

    task_id: str
    data_models: tuple[DataModelSpec, ...]
    artifact_paths: dict

    def model(self, name: str) -> DataModelSpec:
        for m in self.data_models:
            if m.model_name == name:
                return m
        raise ColumnLookupError(f"data model '{name}' not in task '{self.task_id}'")

    def gt_path(self, model_name: str) -> Path:
        return Path(self.artifact_paths["gt"]) / f"{model_name}.csv"

    def predicted_csv_path(self, model_name: str) -> Path:
        return Path(self.artifact_paths["predicted_csv"]) / f"{model_name}.csv"

    def predicted_sql_path(self, model_name: str) -> Path:
        return Path(self.artifact_paths["predicted_sql"]) / f"{model_name}.sql"


def find_spec_file(task_dir: Path) -> Path:
    for name in SPEC_FILENAMES:
        candidate = task_dir / name
        if candidate.exists():
            return candidate
    raise BundleError(f"no data-model spec file in '{task_dir}' (tried {SPEC_FILENAMES})")


def load_task(bundle_root: Path | str, task_id: str) -> TaskSpec:
    """Load one task from the bundle layout tasks/<task_id>/{spec, gt/, predicted/}."""
    bundle_root = Path(bundle_root)
    task_dir = bundle_root / "tasks" / task_id
    if not task_dir.is_dir():
        raise BundleError(f"task directory '{task_dir}' does not exist")
    spec_file = find_spec_file(task_dir)
    models = load_data_model_specs(spec_file)
    gt_dir = task_dir / "gt"
    for m in models:
        if not (gt_dir / f"{m.model_name}.csv").exists():
            raise BundleError(
                f"task '{task_id}' has no ground-truth table for model '{m.model_name}'"
            )
    paths = {
        "spec": spec_file,
        "gt": gt_dir,
        "predicted_csv": task_dir / "predicted",
        "predicted_sql": task_dir / "predicted",
    }
    for optional in ("sources", "staging"):
        if (task_dir / optional).is_dir():
            paths[optional] = task_dir / optional
    return TaskSpec(task_id=task_id, data_models=tuple(models), artifact_paths=paths)


def discover_tasks(bundle_root: Path | str) -> list[str]:
    tasks_dir = Path(bundle_root) / "tasks"
    if not tasks_dir.is_dir():
        raise BundleError(f"bundle '{bundle_root}' has no tasks/ directory")
    return sorted(p.name for p in tasks_dir.iterdir() if p.is_dir())
