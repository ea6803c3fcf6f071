"""The 14-leaf mismatch taxonomy, the classification ledger, and
distribution tallies.

Every audited column receives exactly one leaf.  Leaves carry two derived
dimensions: attribution (agent vs benchmark) and mitigability (what kind
of correction, if any, the finding licenses).  Classification is always a
human act; analyst suggestions are never committed automatically.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path
from typing import NamedTuple

from .errors import InputError, LedgerReferenceError


class Attribution(str, Enum):
    AGENT = "agent"
    BENCHMARK = "benchmark"


class Mitigability(str, Enum):
    NONE = "none"                    # genuine agent failure, kept as signal
    SCRIPT = "script"                # fixable by evaluation-config refinement
    COLUMN_REMOVAL = "column_removal"  # unreliable ground truth, remove column
    PRESERVED = "preserved"          # real-world ambiguity, deliberately kept


class ErrorLeaf(str, Enum):
    FLAWED_SQL_LOGIC = "agent/flawed_sql_logic"
    JOIN_TYPE_ERROR = "agent/join_type_error"
    WRONG_DATA_SOURCE = "agent/wrong_data_source"
    DOMAIN_KNOWLEDGE_GAP = "agent/domain_knowledge_gap"
    NULL_HANDLING_ERROR = "agent/null_handling_error"
    KEY_GENERATION_ERROR = "agent/key_generation_error"
    AMBIGUOUS_DESCRIPTION = "benchmark/ambiguous_description"
    GT_CALCULATION_ERROR = "benchmark/gt_calculation_error"
    FP_ACTUAL_MATCH = "benchmark/eval_false_positive/actual_match"
    FP_FORMAT_MISMATCH = "benchmark/eval_false_positive/format_mismatch"
    FP_DUPLICATED_GT_ROWS = "benchmark/eval_false_positive/duplicated_gt_rows"
    FP_NULL_REPRESENTATION = "benchmark/eval_false_positive/null_representation"
    FP_ROW_ORDERING = "benchmark/eval_false_positive/row_ordering"
    FP_OTHER = "benchmark/eval_false_positive/other"

    @property
    def attribution(self) -> Attribution:
        return Attribution.AGENT if self.value.startswith("agent/") else Attribution.BENCHMARK

    @property
    def is_false_positive(self) -> bool:
        return self.value.startswith("benchmark/eval_false_positive/")

    @property
    def mitigability(self) -> Mitigability:
        if self.is_false_positive:
            return Mitigability.SCRIPT
        if self is ErrorLeaf.GT_CALCULATION_ERROR:
            return Mitigability.COLUMN_REMOVAL
        if self is ErrorLeaf.AMBIGUOUS_DESCRIPTION:
            return Mitigability.PRESERVED
        return Mitigability.NONE


AGENT_LEAVES = tuple(l for l in ErrorLeaf if l.attribution is Attribution.AGENT)
FP_LEAVES = tuple(l for l in ErrorLeaf if l.is_false_positive)
assert len(list(ErrorLeaf)) == 14


class ColumnId(NamedTuple):
    task_id: str
    model_name: str
    column: str

    def key(self) -> str:
        return f"{self.task_id}/{self.model_name}/{self.column}"


@dataclass(frozen=True)
class LedgerEntry:
    column: ColumnId
    category: ErrorLeaf
    reviewer: str
    source_report: str = ""
    timestamp: str = ""

    def to_dict(self) -> dict:
        return {
            "task_id": self.column.task_id,
            "model_name": self.column.model_name,
            "column": self.column.column,
            "category": self.category.value,
            "reviewer": self.reviewer,
            "source_report": self.source_report,
            "timestamp": self.timestamp,
        }

    @staticmethod
    def from_dict(doc: dict) -> "LedgerEntry":
        return LedgerEntry(
            column=ColumnId(doc["task_id"], doc["model_name"], doc["column"]),
            category=ErrorLeaf(doc["category"]),
            reviewer=doc.get("reviewer", ""),
            source_report=doc.get("source_report", ""),
            timestamp=doc.get("timestamp", ""),
        )


def suggest_category(report) -> ErrorLeaf | None:
    """Pass through the analyst's pre-fill; never commits to the ledger."""
    return report.suggested_category


class ClassificationLedger:
    """At most one live entry per column; re-classification archives the
    prior entry to an append-only history."""

    def __init__(self, known_columns=None):
        self.known_columns: set[ColumnId] | None = (
            set(known_columns) if known_columns is not None else None
        )
        self.entries: dict[ColumnId, LedgerEntry] = {}
        self.history: list[LedgerEntry] = []

    @staticmethod
    def from_queue(queue) -> "ClassificationLedger":
        return ClassificationLedger(
            ColumnId(w.task_id, w.model_name, c) for w in queue for c in w.columns
        )

    def record(
        self,
        column: ColumnId,
        category: ErrorLeaf,
        reviewer: str,
        source_report: str = "",
        timestamp: str | None = None,
    ) -> LedgerEntry:
        if self.known_columns is not None and column not in self.known_columns:
            raise LedgerReferenceError(
                f"column '{column.key()}' is not in the audit scope"
            )
        if timestamp is None:
            timestamp = datetime.now(timezone.utc).isoformat()
        entry = LedgerEntry(column, category, reviewer, source_report, timestamp)
        prior = self.entries.get(column)
        if prior is not None:
            self.history.append(prior)
        self.entries[column] = entry
        return entry

    def __len__(self) -> int:
        return len(self.entries)

    def dump_jsonl(self) -> str:
        lines = [json.dumps(e.to_dict()) for e in self.history]
        lines += [
            json.dumps(e.to_dict())
            for e in sorted(self.entries.values(), key=lambda e: e.column)
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.dump_jsonl(), encoding="utf-8")

    @staticmethod
    def load(path: Path | str, known_columns=None) -> "ClassificationLedger":
        ledger = ClassificationLedger(known_columns)
        text = Path(path).read_text(encoding="utf-8")
        for line_number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                entry = LedgerEntry.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise InputError(
                    f"bad ledger record at line {line_number}: {exc}"
                ) from exc
            ledger.record(
                entry.column,
                entry.category,
                entry.reviewer,
                entry.source_report,
                entry.timestamp,
            )
        return ledger

    def digest(self) -> str:
        """Stable digest of the live classification state."""
        payload = json.dumps(
            sorted(
                (e.column.key(), e.category.value) for e in self.entries.values()
            )
        ).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


def _pct(count: int, total: int) -> float:
    if total == 0:
        return 0.0
    quantized = (Decimal(count) * 100 / Decimal(total)).quantize(
        Decimal("0.1"), rounding=ROUND_HALF_UP
    )
    return float(quantized)


@dataclass(frozen=True)
class DistributionTable:
    total: int
    leaf_counts: dict
    leaf_pcts: dict
    fp_count: int
    fp_pct: float
    attribution_counts: dict
    attribution_pcts: dict
    tasks_agent_only: int
    tasks_benchmark_only: int
    tasks_both: int
    tasks_with_benchmark: int

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "leaves": {
                leaf.value: {"count": self.leaf_counts[leaf], "pct": self.leaf_pcts[leaf]}
                for leaf in ErrorLeaf
            },
            "eval_false_positive": {"count": self.fp_count, "pct": self.fp_pct},
            "attribution": {
                a.value: {
                    "count": self.attribution_counts[a],
                    "pct": self.attribution_pcts[a],
                }
                for a in Attribution
            },
            "tasks": {
                "agent_only": self.tasks_agent_only,
                "benchmark_only": self.tasks_benchmark_only,
                "both": self.tasks_both,
                "with_benchmark_error": self.tasks_with_benchmark,
            },
        }

    def render_text(self) -> str:
        rows = []
        rows.append(f"{'Attribution':<11} {'Category':<42} {'Count':>6} {'%':>6}")
        rows.append("-" * 68)
        for leaf in AGENT_LEAVES:
            rows.append(
                f"{'Agent':<11} {leaf.value.split('/', 1)[1]:<42} "
                f"{self.leaf_counts[leaf]:>6} {self.leaf_pcts[leaf]:>6}"
            )
        agent = self.attribution_counts[Attribution.AGENT]
        rows.append(
            f"{'':<11} {'subtotal (agent)':<42} {agent:>6} "
            f"{self.attribution_pcts[Attribution.AGENT]:>6}"
        )
        rows.append("-" * 68)
        rows.append(
            f"{'Benchmark':<11} {'eval_false_positive':<42} "
            f"{self.fp_count:>6} {self.fp_pct:>6}"
        )
        for leaf in FP_LEAVES:
            rows.append(
                f"{'':<11}   {leaf.value.split('/')[-1]:<40} "
                f"{self.leaf_counts[leaf]:>6} {self.leaf_pcts[leaf]:>6}"
            )
        for leaf in (ErrorLeaf.AMBIGUOUS_DESCRIPTION, ErrorLeaf.GT_CALCULATION_ERROR):
            rows.append(
                f"{'Benchmark':<11} {leaf.value.split('/', 1)[1]:<42} "
                f"{self.leaf_counts[leaf]:>6} {self.leaf_pcts[leaf]:>6}"
            )
        bench = self.attribution_counts[Attribution.BENCHMARK]
        rows.append(
            f"{'':<11} {'subtotal (benchmark)':<42} {bench:>6} "
            f"{self.attribution_pcts[Attribution.BENCHMARK]:>6}"
        )
        rows.append("-" * 68)
        rows.append(f"{'':<11} {'total':<42} {self.total:>6} {100.0:>6}")
        rows.append("")
        rows.append(
            f"tasks: agent-only {self.tasks_agent_only}, "
            f"benchmark-only {self.tasks_benchmark_only}, "
            f"both {self.tasks_both}, "
            f">=1 benchmark error {self.tasks_with_benchmark}"
        )
        return "\n".join(rows)


def tally_distribution(ledger: ClassificationLedger) -> DistributionTable:
    """Per-leaf counts and half-up one-decimal percentages, attribution
    subtotals, and task-level overlap statistics."""
    entries = list(ledger.entries.values())
    total = len(entries)
    leaf_counts = {leaf: 0 for leaf in ErrorLeaf}
    task_attrs: dict[str, set[Attribution]] = {}
    for entry in entries:
        leaf_counts[entry.category] += 1
        task_attrs.setdefault(entry.column.task_id, set()).add(entry.category.attribution)

    attribution_counts = {
        a: sum(c for leaf, c in leaf_counts.items() if leaf.attribution is a)
        for a in Attribution
    }
    fp_count = sum(leaf_counts[leaf] for leaf in FP_LEAVES)
    agent_only = sum(1 for attrs in task_attrs.values() if attrs == {Attribution.AGENT})
    bench_only = sum(1 for attrs in task_attrs.values() if attrs == {Attribution.BENCHMARK})
    both = sum(1 for attrs in task_attrs.values() if len(attrs) == 2)

    return DistributionTable(
        total=total,
        leaf_counts=leaf_counts,
        leaf_pcts={leaf: _pct(c, total) for leaf, c in leaf_counts.items()},
        fp_count=fp_count,
        fp_pct=_pct(fp_count, total),
        attribution_counts=attribution_counts,
        attribution_pcts={a: _pct(c, total) for a, c in attribution_counts.items()},
        tasks_agent_only=agent_only,
        tasks_benchmark_only=bench_only,
        tasks_both=both,
        tasks_with_benchmark=bench_only + both,
    )


def record_classification(
    ledger: ClassificationLedger,
    column: ColumnId,
    category: ErrorLeaf,
    reviewer: str,
    source_report: str = "",
) -> ClassificationLedger:
    """Upsert one classification; the prior entry, if any, moves to history."""
    ledger.record(column, category, reviewer, source_report)
    return ledger
