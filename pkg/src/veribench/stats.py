"""Statistical validation machinery: stratification, seeded stratified
sampling, Fleiss' kappa, McNemar's test with Yates' continuity correction,
pairwise agreement, and majority vote.

Only the tests the audit workflow needs are implemented; this is not a
general hypothesis-testing library.
"""
from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import InputError, SamplingError, ShapeError, UndefinedKappaError

STRATA = ("A", "B", "C", "D")


@dataclass(frozen=True)
class StratumAssignment:
    """Stratum of one column given its verdicts under both scripts.

    A: both match.  B: original mismatch, patched match (corrected false
    positive).  C: both mismatch.  D: original match, patched mismatch,
    which would be a regression and is expected to be empty.
    """

    column_id: str
    stratum: str
    original_verdict: bool
    patched_verdict: bool


@dataclass(frozen=True)
class StratifyResult:
    assignments: tuple[StratumAssignment, ...]
    counts: dict
    regressions: tuple[str, ...]  # stratum D column ids

    @property
    def eligible(self) -> int:
        return len(self.assignments)


def _stratum(original: bool, patched: bool) -> str:
    if original and patched:
        return "A"
    if not original and patched:
        return "B"
    if not original and not patched:
        return "C"
    return "D"


def stratify(
    columns: list[tuple[str, bool, bool]],
    exclusions: set[str] | frozenset[str] = frozenset(),
) -> StratifyResult:
    """Assign every non-excluded column to a stratum.

    Exclusions (extraction failures, schema errors, known ground-truth
    error columns) are dropped before assignment so the population isolates
    the effect of the script change.
    """
    seen: set[str] = set()
    assignments = []
    for column_id, original, patched in columns:
        if column_id in seen:
            raise InputError(f"duplicate column id '{column_id}'")
        seen.add(column_id)
        if column_id in exclusions:
            continue
        assignments.append(
            StratumAssignment(column_id, _stratum(original, patched), original, patched)
        )
    counts = {s: sum(1 for a in assignments if a.stratum == s) for s in STRATA}
    regressions = tuple(a.column_id for a in assignments if a.stratum == "D")
    return StratifyResult(tuple(assignments), counts, regressions)


def sample_stratified(
    assignments: list[StratumAssignment] | StratifyResult,
    quotas: dict[str, int],
    seed: int,
) -> list[str]:
    """Uniform without-replacement sample per stratum, deterministic for a
    fixed seed.  The combined output order is shuffled so annotators cannot
    infer strata from presentation order."""
    if isinstance(assignments, StratifyResult):
        assignments = list(assignments.assignments)
    rng = random.Random(seed)
    chosen: list[str] = []
    for stratum in STRATA:
        quota = quotas.get(stratum, 0)
        if quota == 0:
            continue
        members = sorted(a.column_id for a in assignments if a.stratum == stratum)
        if quota > len(members):
            raise SamplingError(
                f"quota {quota} exceeds stratum {stratum} size {len(members)}"
            )
        chosen.extend(rng.sample(members, quota))
    rng.shuffle(chosen)
    return chosen


@dataclass(frozen=True)
class AnnotationMatrix:
    """Complete items x raters label assignments."""

    items: tuple[str, ...]
    raters: tuple[str, ...]
    labels: tuple[tuple[str, ...], ...]  # rows: items, cols: raters

    def __post_init__(self):
        if len(self.labels) != len(self.items):
            raise ShapeError("one label row required per item")
        for row in self.labels:
            if len(row) != len(self.raters):
                raise ShapeError("every item must be labeled by every rater")

    def categories(self) -> list[str]:
        return sorted({label for row in self.labels for label in row})

    def counts(self) -> np.ndarray:
        """n_ij matrix: how many raters assigned category j to item i."""
        cats = {c: j for j, c in enumerate(self.categories())}
        counts = np.zeros((len(self.items), len(cats)), dtype=np.int64)
        for i, row in enumerate(self.labels):
            for label in row:
                counts[i, cats[label]] += 1
        return counts

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["item", *self.raters])
        for item, row in zip(self.items, self.labels):
            writer.writerow([item, *row])
        return out.getvalue()

    @staticmethod
    def from_csv(content: str) -> "AnnotationMatrix":
        reader = csv.reader(io.StringIO(content, newline=""))
        header = next(reader)
        raters = tuple(header[1:])
        items, labels = [], []
        for row in reader:
            if not row:
                continue
            items.append(row[0])
            labels.append(tuple(row[1:]))
        return AnnotationMatrix(tuple(items), raters, tuple(labels))


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    percent_agreement: float  # mean pairwise, in percent
    n_items: int
    n_raters: int
    n_categories: int


def fleiss_kappa(matrix: AnnotationMatrix) -> KappaResult:
    """Fleiss' kappa over a fully populated annotation matrix.

    With n raters, N items and n_ij the count of raters assigning category
    j to item i:

        P_i  = [sum_j n_ij (n_ij - 1)] / [n (n - 1)]
        Pbar = mean_i P_i
        p_j  = sum_i n_ij / (N n)
        Pe   = sum_j p_j^2
        kappa = (Pbar - Pe) / (1 - Pe)

    Pbar is also the raw mean pairwise agreement, returned as a percentage.
    A matrix where every rating lands in one category has Pe = 1, which
    leaves kappa undefined.
    """
    counts = matrix.counts()
    n_items, n_categories = counts.shape
    if n_items < 1 or len(matrix.raters) < 2:
        raise InputError("kappa requires at least one item and two raters")
    n = len(matrix.raters)
    p_i = (counts * (counts - 1)).sum(axis=1) / (n * (n - 1))
    p_bar = float(p_i.mean())
    p_j = counts.sum(axis=0) / (n_items * n)
    p_e = float((p_j**2).sum())
    if p_e >= 1.0:
        raise UndefinedKappaError(
            "expected agreement is 1 (every rating in a single category); "
            "kappa is undefined"
        )
    kappa = (p_bar - p_e) / (1.0 - p_e)
    return KappaResult(
        kappa=kappa,
        percent_agreement=p_bar * 100.0,
        n_items=n_items,
        n_raters=n,
        n_categories=n_categories,
    )


@dataclass(frozen=True)
class McNemarResult:
    b: int  # discordant: first-positive, second-negative
    c: int  # discordant: first-negative, second-positive
    chi2: float
    p: float
    degenerate: bool = False  # no discordant pairs at all


def mcnemar_yates(b: int, c: int) -> McNemarResult:
    """McNemar's test on discordant counts with Yates' continuity correction.

        chi2 = max(|b - c| - 1, 0)^2 / (b + c)

    The p-value is the chi-square survival function at one degree of
    freedom, computed as erfc(sqrt(chi2 / 2)).  Zero discordance yields the
    degenerate result chi2 = 0, p = 1.
    """
    if b < 0 or c < 0:
        raise InputError("discordant counts must be non-negative")
    n = b + c
    if n == 0:
        return McNemarResult(b, c, chi2=0.0, p=1.0, degenerate=True)
    chi2 = max(abs(b - c) - 1, 0) ** 2 / n
    p = math.erfc(math.sqrt(chi2 / 2.0))
    return McNemarResult(b, c, chi2=chi2, p=p)


@dataclass(frozen=True)
class AgreementResult:
    raters: tuple[str, ...]
    matrix: tuple[tuple[float, ...], ...]  # symmetric, 1.0 diagonal
    mean: float  # over unordered pairs

    def mean_percent(self) -> float:
        return round_half_up_percent(self.mean)


def round_half_up_percent(fraction: float) -> float:
    """Render a fraction as a percentage rounded half-up to one decimal."""
    return float(
        (Decimal(repr(fraction)) * 100).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    )


def pairwise_agreement(
    vectors: dict[str, list] | list[list],
    equivalent=None,
) -> AgreementResult:
    """Pairwise agreement fractions between raters' label vectors.

    The comparison predicate is pluggable so domain normalization rules can
    be applied before counting a pair as agreeing; the default is equality.
    """
    if isinstance(vectors, dict):
        raters = tuple(vectors)
        rows = [vectors[r] for r in raters]
    else:
        raters = tuple(f"r{i + 1}" for i in range(len(vectors)))
        rows = list(vectors)
    if len(rows) < 2:
        raise InputError("pairwise agreement requires at least two raters")
    length = len(rows[0])
    for row in rows:
        if len(row) != length:
            raise ShapeError("all label vectors must have equal length")
    if equivalent is None:
        equivalent = lambda a, b: a == b  # noqa: E731
    k = len(rows)
    matrix = [[1.0] * k for _ in range(k)]
    pair_values = []
    for i in range(k):
        for j in range(i + 1, k):
            agreeing = sum(1 for a, b in zip(rows[i], rows[j]) if equivalent(a, b))
            fraction = agreeing / length if length else 1.0
            matrix[i][j] = matrix[j][i] = fraction
            pair_values.append(fraction)
    return AgreementResult(
        raters=raters,
        matrix=tuple(tuple(row) for row in matrix),
        mean=sum(pair_values) / len(pair_values),
    )


def majority_vote(labels: list) -> object | None:
    """The strict-majority label, or None when no label clears half."""
    if not labels:
        return None
    best, best_count = None, 0
    for label in set(labels):
        count = labels.count(label)
        if count > best_count:
            best, best_count = label, count
    return best if best_count * 2 > len(labels) else None
