#!/usr/bin/env python3
# The statistical validation toolkit: stratification of column verdicts,
# seeded stratified sampling, Fleiss' kappa, McNemar's test with Yates'
# correction, pairwise agreement, and majority vote.

from veribench import (
    AnnotationMatrix,
    fleiss_kappa,
    majority_vote,
    mcnemar_yates,
    pairwise_agreement,
    sample_stratified,
    stratify,
)
from veribench.stats import round_half_up_percent
from veribench.synthetic import build_recorded_study, study_strata_input

# --- stratify the recorded study under both scripts --------------------------

study = build_recorded_study()
columns, exclusions = study_strata_input(study)
result = stratify(columns, exclusions)
print(f"eligible columns after exclusions: {result.eligible}")
print(f"strata: A={result.counts['A']} (both match), "
      f"B={result.counts['B']} (patched fixes), "
      f"C={result.counts['C']} (both mismatch), "
      f"D={result.counts['D']} (regressions)")

# --- draw the annotation sample, oversampling the decisive stratum -----------

sample = sample_stratified(result, {"A": 15, "B": 20, "C": 15}, seed=2026)
print(f"\nstratified sample of {len(sample)} columns "
      f"(order shuffled for blinding); first five: {sample[:5]}")

# --- inter-annotator agreement -----------------------------------------------

matrix = AnnotationMatrix(
    items=("i1", "i2", "i3", "i4"),
    raters=("r1", "r2", "r3"),
    labels=(("A", "A", "A"), ("B", "B", "B"), ("A", "A", "A"), ("A", "A", "B")),
)
kappa = fleiss_kappa(matrix)
print(f"\nFleiss' kappa over a 4-item, 3-rater matrix: {kappa.kappa:.3f} "
      f"({round_half_up_percent(kappa.percent_agreement / 100)}% raw agreement)")

# --- McNemar on discordant counts -------------------------------------------

skewed = mcnemar_yates(20, 0)
print(f"\nMcNemar, one-sided disagreement (b=20, c=0): "
      f"chi2={skewed.chi2:.2f}, p={skewed.p:.2e}")
balanced = mcnemar_yates(7, 8)
print(f"McNemar, balanced disagreement (b=7, c=8):   "
      f"chi2={balanced.chi2:.2f}, p={balanced.p:.1f}")

# --- pairwise agreement and consensus ----------------------------------------

rows = (
    [("A", "A", "A")] * 12 + [("B", "B", "C")] * 2 + [("B", "C", "B")] * 5
    + [("C", "B", "B")] * 9 + [("A", "B", "C")] * 2
)
vectors = {f"r{i + 1}": [row[i] for row in rows] for i in range(3)}
agreement = pairwise_agreement(vectors)
flat = sorted(agreement.matrix[i][j] for i in range(3) for j in range(i + 1, 3))
print(f"\npairwise agreement over 30 shared items: "
      f"{round_half_up_percent(flat[0])}% .. {round_half_up_percent(flat[-1])}%, "
      f"mean {agreement.mean_percent()}%")

votes = [["E", "E", "N"], ["E", "N", "X"], ["N", "N", "N"]]
print("majority votes:", [majority_vote(v) for v in votes])
