#!/usr/bin/env python3
# Semantic table comparison: strict legacy semantics versus the verified
# semantics with boolean normalization, float tolerance, percent/decimal
# rescaling, NULL equivalence, and order-insensitive matching.

from veribench import PRESETS, cells_equivalent, columns_equivalent, parse_cell
from veribench.tabular import ColumnSeries

legacy = PRESETS["legacy"]
verified = PRESETS["verified-v1"]


def col(name, values):
    return ColumnSeries(name, tuple(parse_cell(v) for v in values))


# --- cell-level rules ------------------------------------------------------

pairs = [
    ("true", "1"),      # boolean representation
    ("4.41", "4.41"),   # identical
    ("1.0", "1.0000001"),  # inside float tolerance
    ("", "0"),          # NULL vs zero (spec silent)
    ("abc", "ABC"),     # general text is never casefolded
]
print("cell equivalence (legacy vs verified):")
for a, b in pairs:
    strict = cells_equivalent(parse_cell(a), parse_cell(b), legacy)
    loose = cells_equivalent(parse_cell(a), parse_cell(b), verified)
    print(f"  {a!r:12} vs {b!r:12}  legacy={strict!s:5}  verified={loose!s:5}")

# --- the percent/decimal rescaling case ------------------------------------

# A growth-rate column: the prediction is mathematically identical but
# rendered as a decimal fraction instead of a percentage.
gt = col("growth_rate", ["4.41", "-16.73", "28.20", "3.04", "5.24"])
pred = col("growth_rate", ["0.0441", "-0.1673", "0.2820", "0.0304", "0.0524"])

strict_verdict = columns_equivalent(gt, pred, legacy)
print(f"\nscaled column under legacy:   matched={strict_verdict.matched} "
      f"rate={strict_verdict.match_rate:.2f}")

loose_verdict = columns_equivalent(gt, pred, verified)
print(f"scaled column under verified: matched={loose_verdict.matched} "
      f"rate={loose_verdict.match_rate:.2f} rules={loose_verdict.applied_rules}")
print(f"scale evidence: ratio={loose_verdict.scale.ratio} "
      f"pairs={loose_verdict.scale.pair_count} "
      f"max_dev={loose_verdict.scale.max_rel_deviation:.2e}")

# --- order insensitivity ----------------------------------------------------

ordered = col("points", ["10", "25", "3", "42"])
shuffled = col("points", ["42", "10", "25", "3"])
print(f"\npermuted column under legacy:   "
      f"{columns_equivalent(ordered, shuffled, legacy).matched}")
print(f"permuted column under verified: "
      f"{columns_equivalent(ordered, shuffled, verified).matched}")

# A genuinely wrong column stays wrong under both semantics.
wrong = col("points", ["42", "10", "25", "99"])
print(f"wrong column under verified:    "
      f"{columns_equivalent(ordered, wrong, verified).matched}")
