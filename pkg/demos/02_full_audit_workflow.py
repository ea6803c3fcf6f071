#!/usr/bin/env python3
# End-to-end audit of a small synthetic benchmark: evaluate under the
# legacy semantics, root-cause every unmatched column, classify the
# findings, emit a corrected bundle, and re-evaluate.

import tempfile
from pathlib import Path

from veribench import (
    ClassificationLedger,
    ColumnId,
    DeterministicBackend,
    build_work_queue,
    compute_metrics,
    derive_eval_patch,
    dispatch_analysis,
    emit_verified_bundle,
    evaluate_task,
    materialize_environment,
    suggest_category,
)
from veribench.corrector import build_manifest
from veribench.equivalence import PRESETS
from veribench.evaluator import load_recorded_outcomes
from veribench.synthetic import build_mini_benchmark
from veribench.tabular import discover_tasks, load_task

work = Path(tempfile.mkdtemp(prefix="veribench-demo-"))
bundle = build_mini_benchmark(work / "bundle").root
recorded = load_recorded_outcomes(bundle / "el_outcomes.json")
print(f"synthetic benchmark at {bundle}")

# --- step 1: evaluate under the strict legacy semantics ---------------------

legacy_verdicts = [
    evaluate_task(load_task(bundle, t), PRESETS["legacy"], recorded_el=recorded)
    for t in discover_tasks(bundle)
]
before = compute_metrics(legacy_verdicts)
print(f"\nlegacy evaluation: srdel={before.srdel:.0%} "
      f"models={before.models_passed}/{before.models_total} "
      f"unmatched columns={before.unmatched_columns}")

# --- step 2: build the audit queue and hermetic environments ---------------

queue = build_work_queue(legacy_verdicts)
print(f"work queue: {len(queue)} (task, model) pairs, "
      f"{sum(len(w.columns) for w in queue)} columns")
environments = {
    task_id: materialize_environment(load_task(bundle, task_id), queue, work / "envs")
    for task_id in sorted({w.task_id for w in queue})
}

# --- step 3: deterministic transform-search analysis ------------------------

reports = dispatch_analysis(queue, DeterministicBackend(), environments,
                            PRESETS["verified-v1"], parallelism=4)
print("\nanalysis reports:")
for r in reports:
    chain = [t.label() for t in r.derivation] if r.derivation else None
    print(f"  {r.task_id}/{r.model_name}/{r.column}: verified={r.verified} "
          f"best={r.best_match_rate:.4f} suggestion={r.suggested_category} chain={chain}")

# --- step 4: human-in-the-loop classification (here: accept suggestions) ----

ledger = ClassificationLedger(
    ColumnId(w.task_id, w.model_name, c) for w in queue for c in w.columns
)
for r in reports:
    suggestion = suggest_category(r)
    if suggestion is not None:
        ledger.record(ColumnId(r.task_id, r.model_name, r.column), suggestion,
                      reviewer="demo", source_report=f"report:{r.column}")
print(f"\nledger: {len(ledger)} classifications "
      f"({sum(1 for e in ledger.entries.values() if e.category.is_false_positive)} "
      f"false positives)")

# --- step 5: derive corrections and emit the verified bundle ----------------

patch = derive_eval_patch(ledger)
manifest = build_manifest(bundle, ledger, "demo-verified")
corrected = emit_verified_bundle(bundle, patch, manifest, "demo-verified",
                                 work / "verified_bundle")
print(f"corrected bundle at {corrected}")
print(f"  removed {manifest.columns_removed} of {manifest.columns_total} columns "
      f"({manifest.removed_fraction:.1%}); models kept: {manifest.models_total}")

# --- step 6: re-evaluate with the patched config on the corrected bundle ----

after_verdicts = [
    evaluate_task(load_task(corrected, t), patch.config, recorded_el=recorded)
    for t in discover_tasks(corrected)
]
after = compute_metrics(after_verdicts)
print(f"\nverified evaluation: models={after.models_passed}/{after.models_total} "
      f"unmatched columns={after.unmatched_columns}")
print(f"improvement: +{after.models_passed - before.models_passed} models, "
      f"attributable entirely to benchmark correction")
