"""Strict and verified comparison semantics for table columns.

Two modes are supported.  Strict mode reproduces a legacy evaluation:
raw-text equality, positional row comparison, no tolerances.  Verified
mode layers configurable semantic-equivalence rules on top: boolean
normalization, floating-point tolerance, percent/decimal scale
normalization, NULL-representation equivalence, and order-insensitive
multiset matching.  Strict match always implies verified match.
"""
from __future__ import annotations

import json
import statistics
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum

from .errors import ConfigError, ShapeError
from .tabular import (
    CellKind,
    CellValue,
    ColumnSeries,
    NullDirective,
    TokenConfig,
    format_number,
)


class Mode(str, Enum):
    STRICT = "strict"
    VERIFIED = "verified"


class NullZeroRule(str, Enum):
    NEVER = "never"
    WHEN_SPEC_SILENT = "when_spec_silent"


@dataclass(frozen=True)
class PercentScaleRule:
    enabled: bool = False
    per_pair_rel_tol: float = 1e-6
    min_pairs: int = 3


# Only the percent<->decimal pair is recognised; arbitrary ratios would
# mask genuine formula errors.
SCALE_TARGETS = (100.0, 0.01)

RULE_TOLERANCE = "tolerance"
RULE_BOOL = "bool_normalization"
RULE_NULL_ZERO = "null_zero"
RULE_ORDER = "order_insensitive"
RULE_SCALE = "percent_scale"


@dataclass(frozen=True)
class EvalConfig:
    """Complete specification of one evaluation mode."""

    mode: Mode = Mode.VERIFIED
    abs_tol: float = 1e-6
    rel_tol: float = 1e-9
    bool_normalization: bool = True
    percent_scale: PercentScaleRule = PercentScaleRule(enabled=True)
    null_zero_equivalence: NullZeroRule = NullZeroRule.WHEN_SPEC_SILENT
    order_insensitive_default: bool = True
    tokens: TokenConfig = TokenConfig()

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ConfigError("tolerances must be non-negative")
        if self.mode is Mode.STRICT:
            if (
                self.abs_tol != 0.0
                or self.rel_tol != 0.0
                or self.bool_normalization
                or self.percent_scale.enabled
                or self.null_zero_equivalence is not NullZeroRule.NEVER
                or self.order_insensitive_default
            ):
                raise ConfigError(
                    "strict mode forces all normalizations off, tolerances 0, "
                    "order-sensitive comparison"
                )

    def enabled_rules(self) -> set[str]:
        rules: set[str] = set()
        if self.mode is Mode.STRICT:
            return rules
        if self.abs_tol > 0 or self.rel_tol > 0:
            rules.add(RULE_TOLERANCE)
        if self.bool_normalization:
            rules.add(RULE_BOOL)
        if self.null_zero_equivalence is NullZeroRule.WHEN_SPEC_SILENT:
            rules.add(RULE_NULL_ZERO)
        if self.order_insensitive_default:
            rules.add(RULE_ORDER)
        if self.percent_scale.enabled:
            rules.add(RULE_SCALE)
        return rules

    def to_json(self) -> str:
        doc = {
            "mode": self.mode.value,
            "abs_tol": self.abs_tol,
            "rel_tol": self.rel_tol,
            "bool_normalization": self.bool_normalization,
            "percent_scale": {
                "enabled": self.percent_scale.enabled,
                "per_pair_rel_tol": self.percent_scale.per_pair_rel_tol,
                "min_pairs": self.percent_scale.min_pairs,
            },
            "null_zero_equivalence": self.null_zero_equivalence.value,
            "order_insensitive_default": self.order_insensitive_default,
            "null_tokens": sorted(self.tokens.null_tokens),
            "bool_true_tokens": sorted(self.tokens.bool_true_tokens),
            "bool_false_tokens": sorted(self.tokens.bool_false_tokens),
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "EvalConfig":
        doc = json.loads(text)
        ps = doc.get("percent_scale", {})
        return EvalConfig(
            mode=Mode(doc.get("mode", "verified")),
            abs_tol=float(doc.get("abs_tol", 0.0)),
            rel_tol=float(doc.get("rel_tol", 0.0)),
            bool_normalization=bool(doc.get("bool_normalization", False)),
            percent_scale=PercentScaleRule(
                enabled=bool(ps.get("enabled", False)),
                per_pair_rel_tol=float(ps.get("per_pair_rel_tol", 1e-6)),
                min_pairs=int(ps.get("min_pairs", 3)),
            ),
            null_zero_equivalence=NullZeroRule(doc.get("null_zero_equivalence", "never")),
            order_insensitive_default=bool(doc.get("order_insensitive_default", False)),
            tokens=TokenConfig(
                null_tokens=frozenset(doc.get("null_tokens", DEFAULT_PRESETS_NULL)),
                bool_true_tokens=frozenset(doc.get("bool_true_tokens", ["true"])),
                bool_false_tokens=frozenset(doc.get("bool_false_tokens", ["false"])),
            ),
        )

    @staticmethod
    def preset(name: str) -> "EvalConfig":
        try:
            return PRESETS[name]
        except KeyError:
            raise ConfigError(
                f"unknown preset '{name}'; available: {sorted(PRESETS)}"
            ) from None


DEFAULT_PRESETS_NULL = ["", "nan", "none", "null"]

#: Named, fixed configuration documents.  "legacy" reproduces the strict
#: original comparison; "verified-v1" is the patched semantics with all
#: normalization rules on.
PRESETS: dict[str, EvalConfig] = {
    "legacy": EvalConfig(
        mode=Mode.STRICT,
        abs_tol=0.0,
        rel_tol=0.0,
        bool_normalization=False,
        percent_scale=PercentScaleRule(enabled=False),
        null_zero_equivalence=NullZeroRule.NEVER,
        order_insensitive_default=False,
    ),
    "verified-v1": EvalConfig(),
}


@dataclass(frozen=True)
class ScaleEvidence:
    """Evidence that one column is a uniform 100x or 0.01x rescaling of the other."""

    ratio: float
    pair_count: int
    max_rel_deviation: float


@dataclass(frozen=True)
class ColumnVerdict:
    """Outcome of comparing one predicted column against its ground truth."""

    column: str
    matched: bool
    match_rate: float
    evidence: tuple = ()
    applied_rules: tuple[str, ...] = ()
    scale: ScaleEvidence | None = None


def _bool_view(cell: CellValue, tokens: TokenConfig) -> bool | None:
    """Boolean reading of a cell, if it has one: Bool, exact 0/1 numerics,
    and text in the configured boolean token sets."""
    if cell.kind is CellKind.BOOL:
        return bool(cell.value)
    if cell.kind in (CellKind.INT, CellKind.FLOAT):
        if cell.value == 1:
            return True
        if cell.value == 0:
            return False
        return None
    if cell.kind is CellKind.TEXT:
        folded = cell.value.casefold()
        if folded in tokens.bool_true_tokens:
            return True
        if folded in tokens.bool_false_tokens:
            return False
    return None


def _numeric_close(a: float, b: float, cfg: EvalConfig) -> bool:
    diff = abs(a - b)
    return diff <= cfg.abs_tol or diff <= cfg.rel_tol * max(abs(a), abs(b))


def _match_cells(
    a: CellValue,
    b: CellValue,
    cfg: EvalConfig,
    null_directive: NullDirective | None,
) -> tuple[bool, set[str]]:
    """Pairwise equivalence plus the set of rules that made it succeed."""
    if cfg.mode is Mode.STRICT:
        return a.raw == b.raw, set()

    if a.kind is CellKind.NULL or b.kind is CellKind.NULL:
        if a.kind is CellKind.NULL and b.kind is CellKind.NULL:
            return True, set()
        other = b if a.kind is CellKind.NULL else a
        if (
            cfg.null_zero_equivalence is NullZeroRule.WHEN_SPEC_SILENT
            and null_directive is None
            and other.is_numeric()
            and other.value == 0
        ):
            return True, {RULE_NULL_ZERO}
        return False, set()

    if cfg.bool_normalization:
        av, bv = _bool_view(a, cfg.tokens), _bool_view(b, cfg.tokens)
        if av is not None and bv is not None and av == bv:
            rules = set() if (a.kind is b.kind is CellKind.BOOL) else {RULE_BOOL}
            if a.kind is CellKind.TEXT and b.kind is CellKind.TEXT and a.value == b.value:
                rules = set()
            return True, rules

    if a.is_numeric() and b.is_numeric():
        if a.value == b.value:
            return True, set()
        if _numeric_close(float(a.value), float(b.value), cfg):
            return True, {RULE_TOLERANCE}
        return False, set()

    if a.kind is CellKind.BOOL and b.kind is CellKind.BOOL:
        return a.value == b.value, set()

    if a.kind is CellKind.TEXT and b.kind is CellKind.TEXT:
        return a.value == b.value, set()

    return False, set()


def cells_equivalent(
    a: CellValue,
    b: CellValue,
    cfg: EvalConfig,
    null_directive: NullDirective | None = None,
) -> bool:
    """Total, symmetric cell equivalence under the configured mode."""
    return _match_cells(a, b, cfg, null_directive)[0]


def detect_uniform_scale(
    gt: ColumnSeries, pred: ColumnSeries, cfg: EvalConfig
) -> ScaleEvidence | None:
    """Detect an exact percent<->decimal rescaling between two numeric columns.

    Over all row-aligned pairs where both sides are numeric and nonzero the
    ratio gt/pred must agree with its median within per_pair_rel_tol, the
    median itself must be 100 or 0.01, and at least min_pairs pairs must
    exist.  Columns containing any non-numeric, non-null cell never yield
    scale evidence.
    """
    if len(gt) != len(pred):
        raise ShapeError(f"column lengths differ: {len(gt)} vs {len(pred)}")
    rule = cfg.percent_scale
    if cfg.mode is not Mode.VERIFIED or not rule.enabled:
        return None
    ratios: list[float] = []
    for g, p in zip(gt.cells, pred.cells):
        for cell in (g, p):
            if cell.kind not in (CellKind.INT, CellKind.FLOAT, CellKind.NULL):
                return None
        if g.kind is CellKind.NULL or p.kind is CellKind.NULL:
            continue
        if g.value == 0 or p.value == 0:
            continue
        ratios.append(float(g.value) / float(p.value))
    if len(ratios) < rule.min_pairs:
        return None
    median = statistics.median(ratios)
    if median == 0:
        return None
    max_dev = max(abs(r - median) / abs(median) for r in ratios)
    if max_dev > rule.per_pair_rel_tol:
        return None
    if not any(
        abs(median - target) / target <= rule.per_pair_rel_tol for target in SCALE_TARGETS
    ):
        return None
    return ScaleEvidence(ratio=median, pair_count=len(ratios), max_rel_deviation=max_dev)


def apply_scale(column: ColumnSeries, ratio: float) -> ColumnSeries:
    """Multiply every numeric cell by ratio; other cells pass through."""
    cells = []
    for cell in column.cells:
        if cell.is_numeric():
            scaled = float(cell.value) * ratio
            cells.append(CellValue(CellKind.FLOAT, scaled, format_number(scaled)))
        else:
            cells.append(cell)
    return ColumnSeries(column.name, tuple(cells))


def _sort_key(cell: CellValue) -> tuple:
    # Variant tag, then numeric value or casefolded text, then raw text as a
    # deterministic tiebreak.
    if cell.kind is CellKind.NULL:
        return (0, 0.0, cell.raw)
    if cell.kind is CellKind.BOOL:
        return (1, float(cell.value), cell.raw)
    if cell.is_numeric():
        return (2, float(cell.value), cell.raw)
    return (3, cell.value.casefold(), cell.raw)


def _match_ordered(
    gt: ColumnSeries,
    pred: ColumnSeries,
    cfg: EvalConfig,
    null_directive: NullDirective | None,
    row_keys: list[str] | None,
) -> tuple[int, list, set[str]]:
    matched = 0
    mismatches = []
    rules: set[str] = set()
    for i, (g, p) in enumerate(zip(gt.cells, pred.cells)):
        ok, used = _match_cells(g, p, cfg, null_directive)
        if ok:
            matched += 1
            rules |= used
        else:
            key = row_keys[i] if row_keys else str(i)
            mismatches.append((key, g.raw, p.raw))
    return matched, mismatches, rules


def _match_multiset(
    gt: ColumnSeries,
    pred: ColumnSeries,
    cfg: EvalConfig,
    null_directive: NullDirective | None,
) -> tuple[int, list, set[str]]:
    """Greedy maximum multiset matching over canonicalized cells.

    Matching proceeds in phases: exact canonical buckets (nulls, texts,
    booleans including their normalized 0/1 and token-text forms), then a
    sorted two-pointer pass over leftover numerics with tolerance, then the
    NULL<->0 rule on what remains.  Greedy matching on sorted keys is
    deterministic and permutation-invariant.
    """
    rules: set[str] = set()
    if cfg.mode is Mode.STRICT:
        # strict semantics stay raw-text equality even for multiset overlap
        g_counts = Counter(c.raw for c in gt.cells)
        p_counts = Counter(c.raw for c in pred.cells)
        matched = sum((g_counts & p_counts).values())
        g_left = sorted((g_counts - p_counts).elements())
        p_left = sorted((p_counts - g_counts).elements())
        mismatches = [
            (f"unmatched:{i}", g, p)
            for i, (g, p) in enumerate(
                zip(
                    g_left + [""] * max(0, len(p_left) - len(g_left)),
                    p_left + [""] * max(0, len(g_left) - len(p_left)),
                )
            )
        ]
        return matched, mismatches, rules

    null_ok = (
        cfg.null_zero_equivalence is NullZeroRule.WHEN_SPEC_SILENT and null_directive is None
    )

    def split(cells):
        nulls, bools, numerics, texts = [], [], [], []
        for c in cells:
            if c.kind is CellKind.NULL:
                nulls.append(c)
            elif cfg.bool_normalization and (bv := _bool_view(c, cfg.tokens)) is not None:
                bools.append((bv, c))
            elif c.is_numeric():
                numerics.append(c)
            elif c.kind is CellKind.BOOL:
                bools.append((bool(c.value), c))
            else:
                texts.append(c)
        return nulls, bools, numerics, texts

    g_nulls, g_bools, g_nums, g_texts = split(gt.cells)
    p_nulls, p_bools, p_nums, p_texts = split(pred.cells)
    matched = 0

    # Nulls match each other outright.
    n = min(len(g_nulls), len(p_nulls))
    matched += n
    g_nulls, p_nulls = g_nulls[n:], p_nulls[n:]

    # Texts match on exact value.
    g_text_counts = Counter(c.value for c in g_texts)
    p_text_counts = Counter(c.value for c in p_texts)
    text_overlap = g_text_counts & p_text_counts
    matched += sum(text_overlap.values())
    g_text_left = list((g_text_counts - p_text_counts).elements())
    p_text_left = list((p_text_counts - g_text_counts).elements())

    # Booleans match on truth value.  Pure Bool cells are consumed before
    # numeric 0/1 cells so the numeric pool keeps its tolerance partners;
    # leftover numerics rejoin that pool, other leftovers stay as evidence.
    g_bool_left: list[CellValue] = []
    p_bool_left: list[CellValue] = []
    for truth in (True, False):
        g_side = sorted(
            (c for v, c in g_bools if v is truth), key=lambda c: c.kind is not CellKind.BOOL
        )
        p_side = sorted(
            (c for v, c in p_bools if v is truth), key=lambda c: c.kind is not CellKind.BOOL
        )
        n = min(len(g_side), len(p_side))
        if n and any(
            a.kind is not b.kind or a.raw != b.raw
            for a, b in zip(g_side[:n], p_side[:n])
        ):
            rules.add(RULE_BOOL)
        matched += n
        for leftover, nums, bool_left in (
            (g_side[n:], g_nums, g_bool_left),
            (p_side[n:], p_nums, p_bool_left),
        ):
            for cell in leftover:
                (nums if cell.is_numeric() else bool_left).append(cell)

    # Numerics: sorted two-pointer with tolerance.
    g_nums.sort(key=_sort_key)
    p_nums.sort(key=_sort_key)
    i = j = 0
    g_num_left, p_num_left = [], []
    while i < len(g_nums) and j < len(p_nums):
        a, b = g_nums[i], p_nums[j]
        ok, used = _match_cells(a, b, cfg, null_directive)
        if ok:
            matched += 1
            rules |= used
            i += 1
            j += 1
        elif _sort_key(a) < _sort_key(b):
            g_num_left.append(a)
            i += 1
        else:
            p_num_left.append(b)
            j += 1
    g_num_left.extend(g_nums[i:])
    p_num_left.extend(p_nums[j:])

    # NULL <-> numeric 0 equivalence on the leftovers.
    if null_ok:
        for nulls, nums in ((g_nulls, p_num_left), (p_nulls, g_num_left)):
            zeros = [c for c in nums if c.value == 0]
            n = min(len(nulls), len(zeros))
            if n:
                rules.add(RULE_NULL_ZERO)
                matched += n
                del nulls[:n]
                for z in zeros[:n]:
                    nums.remove(z)

    g_left = [c.raw for c in g_nulls + g_num_left + g_bool_left] + g_text_left
    p_left = [c.raw for c in p_nulls + p_num_left + p_bool_left] + p_text_left
    mismatches = [
        (f"unmatched:{i}", g, p)
        for i, (g, p) in enumerate(
            zip(
                sorted(g_left) + [""] * max(0, len(p_left) - len(g_left)),
                sorted(p_left) + [""] * max(0, len(g_left) - len(p_left)),
            )
        )
    ]
    return matched, mismatches, rules


def columns_equivalent(
    gt: ColumnSeries,
    pred: ColumnSeries,
    cfg: EvalConfig,
    order_sensitive: bool | None = None,
    null_directive: NullDirective | None = None,
    row_keys: list[str] | None = None,
) -> ColumnVerdict:
    """Compare one predicted column against ground truth under cfg.

    Length mismatch is an outcome, not an error: the match rate uses the
    larger length as denominator so extra or missing rows depress it.  In
    verified mode an initially unmatched column is retried after uniform
    percent-scale detection.
    """
    ordered = cfg.mode is Mode.STRICT or (
        order_sensitive if order_sensitive is not None else not cfg.order_insensitive_default
    )
    denominator = max(len(gt), len(pred))

    def compare(gt_col: ColumnSeries, pred_col: ColumnSeries) -> tuple[int, list, set[str]]:
        if len(gt_col) == len(pred_col) and ordered:
            return _match_ordered(gt_col, pred_col, cfg, null_directive, row_keys)
        matched, mismatches, rules = _match_multiset(gt_col, pred_col, cfg, null_directive)
        if not ordered and cfg.mode is Mode.VERIFIED:
            rules = rules | {RULE_ORDER}
        if len(gt_col) != len(pred_col):
            mismatches.insert(
                0, ("__row_count__", str(len(gt_col)), str(len(pred_col)))
            )
        return matched, mismatches, rules

    matched, mismatches, rules = compare(gt, pred)
    rate = matched / denominator if denominator else 1.0
    scale = None

    if rate < 1.0 and cfg.mode is Mode.VERIFIED and cfg.percent_scale.enabled and len(
        gt
    ) == len(pred):
        evidence = detect_uniform_scale(gt, pred, cfg)
        if evidence is not None:
            rescaled = apply_scale(pred, evidence.ratio)
            re_matched, re_mismatches, re_rules = compare(gt, rescaled)
            if denominator and re_matched == denominator:
                matched, mismatches = re_matched, re_mismatches
                rules = rules | re_rules | {RULE_SCALE}
                rate = 1.0
                scale = evidence

    return ColumnVerdict(
        column=gt.name,
        matched=rate == 1.0,
        match_rate=rate,
        evidence=tuple(mismatches[:20]),
        applied_rules=tuple(sorted(rules & cfg.enabled_rules())),
        scale=scale,
    )


def strict_config(base: EvalConfig | None = None) -> EvalConfig:
    """The strict document with token sets carried over from base."""
    legacy = PRESETS["legacy"]
    if base is None:
        return legacy
    return replace(legacy, tokens=base.tokens)
