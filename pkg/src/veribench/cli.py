"""Command-line entry point driving the full audit workflow.

Each verb is a thin wrapper over one module operation; results are
identical to calling the library directly.  Exit codes: 0 success, 1 the
evaluate verb found failures, 2 usage error, 3 I/O or bundle error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import analyst, corrector, service, stats, taxonomy, workspace
from .equivalence import EvalConfig, PRESETS
from .errors import UsageError, VeribenchError
from .evaluator import (
    compute_metrics,
    evaluate_task,
    load_recorded_outcomes,
    parse_eval_log,
    write_eval_log,
)
from .tabular import discover_tasks, load_task

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2
EXIT_IO = 3


class _Once(argparse.Action):
    """Store a value, rejecting a second occurrence of the same option."""

    def __call__(self, parser, namespace, values, option_string=None):
        seen = getattr(namespace, "_seen_options", None)
        if seen is None:
            seen = set()
            setattr(namespace, "_seen_options", seen)
        if self.dest in seen:
            parser.error(f"duplicate option {option_string}")
        seen.add(self.dest)
        setattr(namespace, self.dest, values)


@dataclass(frozen=True)
class Command:
    verb: str
    options: argparse.Namespace


def _load_config(name_or_path: str | None) -> EvalConfig:
    if not name_or_path:
        return PRESETS["verified-v1"]
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]
    path = Path(name_or_path)
    if not path.exists():
        raise UsageError(
            f"--config '{name_or_path}' is neither a preset {sorted(PRESETS)} nor a file"
        )
    return EvalConfig.from_json(path.read_text(encoding="utf-8"))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veribench",
        description="Benchmark-audit and verified-evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def opt(sp, *flags, **kwargs):
        kwargs.setdefault("action", _Once)
        sp.add_argument(*flags, **kwargs)

    sp = sub.add_parser("evaluate", help="evaluate a bundle and write the log")
    opt(sp, "--bundle", required=True)
    opt(sp, "--config", default="verified-v1")
    opt(sp, "--out", required=True)
    opt(sp, "--el-outcomes", dest="el_outcomes")

    sp = sub.add_parser("audit-prep", help="build the work queue and environments")
    opt(sp, "--log", required=True)
    opt(sp, "--bundle", required=True)
    opt(sp, "--out", required=True)

    sp = sub.add_parser("analyze", help="root-cause every queued column")
    opt(sp, "--log", required=True)
    opt(sp, "--envs", required=True)
    opt(sp, "--config", default="verified-v1")
    opt(sp, "--backend", default="deterministic", choices=["deterministic", "external"])
    opt(sp, "--parallelism", type=int, default=1)
    opt(sp, "--endpoint")
    opt(sp, "--token")
    opt(sp, "--timeout", type=float, default=float(os.environ.get("VERIBENCH_TIMEOUT", 30.0)))
    opt(sp, "--retries", type=int, default=int(os.environ.get("VERIBENCH_RETRIES", 2)))
    opt(sp, "--out", required=True)

    sp = sub.add_parser("classify", help="record one human classification")
    opt(sp, "--ledger", required=True)
    opt(sp, "--log")
    opt(sp, "--task", required=True)
    opt(sp, "--model", required=True)
    opt(sp, "--column", required=True)
    opt(sp, "--category", required=True)
    opt(sp, "--reviewer", default="anonymous")

    sp = sub.add_parser("sample", help="stratified sample for an annotation study")
    opt(sp, "--log-original", dest="log_original", required=True)
    opt(sp, "--log-patched", dest="log_patched", required=True)
    opt(sp, "--ledger", help="exclude its ground-truth error columns")
    sp.add_argument("--quota", action="append", default=[], metavar="STRATUM=N")
    opt(sp, "--seed", type=int, default=0)

    sp = sub.add_parser("agree", help="agreement statistics")
    agree_sub = sp.add_subparsers(dest="stat", required=True)
    mc = agree_sub.add_parser("mcnemar")
    opt(mc, "--b", type=int, required=True)
    opt(mc, "--c", type=int, required=True)
    ka = agree_sub.add_parser("kappa")
    opt(ka, "--matrix", required=True, help="CSV: item,rater1,rater2,...")
    pw = agree_sub.add_parser("pairwise")
    opt(pw, "--matrix", required=True)
    mj = agree_sub.add_parser("majority")
    opt(mj, "--labels", required=True, help="comma-separated labels for one item")

    sp = sub.add_parser("correct", help="emit a corrected bundle from a ledger")
    opt(sp, "--bundle", required=True)
    opt(sp, "--ledger", required=True)
    opt(sp, "--out", required=True)
    opt(sp, "--version", default="verified")
    opt(sp, "--mode", default="both", choices=["both", "script-only", "removal-only"])

    sp = sub.add_parser("report", help="render metrics and distribution tables")
    opt(sp, "--log")
    opt(sp, "--ledger")
    sp.add_argument("--json", action="store_true")

    sp = sub.add_parser("serve", help="run the review service")
    opt(sp, "--port", type=int, default=8765)
    opt(sp, "--reports")
    opt(sp, "--log")
    opt(sp, "--ledger")
    opt(sp, "--labels")
    opt(sp, "--items")
    opt(sp, "--token", default=os.environ.get("VERIBENCH_TOKEN", ""))

    return parser


def parse_args(argv: list[str]) -> Command:
    parser = _build_parser()
    options = parser.parse_args(argv)
    return Command(verb=options.verb, options=options)


def _cmd_evaluate(opts) -> int:
    cfg = _load_config(opts.config)
    recorded = None
    bundle = Path(opts.bundle)
    outcome_file = (
        Path(opts.el_outcomes) if opts.el_outcomes else bundle / "el_outcomes.json"
    )
    if outcome_file.exists():
        recorded = load_recorded_outcomes(outcome_file)
    verdicts = [
        evaluate_task(load_task(bundle, task_id), cfg, recorded_el=recorded)
        for task_id in discover_tasks(bundle)
    ]
    Path(opts.out).write_bytes(write_eval_log(verdicts))
    metrics = compute_metrics(verdicts)
    print(
        f"srdel {metrics.srdel * 100:.2f}%  srdt {metrics.srdt * 100:.2f}% "
        f"({metrics.models_passed}/{metrics.models_total})  "
        f"unmatched columns {metrics.unmatched_columns}"
    )
    failures = any(v.failure_class.value != "none" for v in verdicts)
    return EXIT_FAILURES if failures else EXIT_OK


def _cmd_audit_prep(opts) -> int:
    verdicts = parse_eval_log(Path(opts.log).read_bytes())
    queue = workspace.build_work_queue(verdicts)
    dest = Path(opts.out)
    dest.mkdir(parents=True, exist_ok=True)
    (dest / "queue.json").write_text(
        json.dumps(
            [
                {"task_id": w.task_id, "model_name": w.model_name, "columns": list(w.columns)}
                for w in queue
            ],
            indent=2,
        ),
        encoding="utf-8",
    )
    for task_id in sorted({w.task_id for w in queue}):
        task = load_task(opts.bundle, task_id)
        workspace.materialize_environment(task, queue, dest)
    total = sum(len(w.columns) for w in queue)
    print(f"queued {total} columns across {len(queue)} (task, model) pairs")
    return EXIT_OK


def _cmd_analyze(opts) -> int:
    cfg = _load_config(opts.config)
    verdicts = parse_eval_log(Path(opts.log).read_bytes())
    queue = workspace.build_work_queue(verdicts)
    environments = {
        task_id: workspace.open_environment(opts.envs, task_id)
        for task_id in sorted({w.task_id for w in queue})
    }
    if opts.backend == "external":
        endpoint = opts.endpoint or os.environ.get("VERIBENCH_ENDPOINT", "")
        if not endpoint:
            raise UsageError("external backend needs --endpoint or VERIBENCH_ENDPOINT")
        backend = analyst.ExternalBackend(
            endpoint=endpoint,
            token=opts.token or os.environ.get("VERIBENCH_TOKEN", ""),
            timeout=opts.timeout,
            retries=opts.retries,
        )
    else:
        backend = analyst.DeterministicBackend()
    reports = analyst.dispatch_analysis(
        queue, backend, environments, cfg, parallelism=opts.parallelism
    )
    Path(opts.out).write_text(analyst.write_reports(reports), encoding="utf-8")
    verified = sum(1 for r in reports if r.verified)
    print(f"analyzed {len(reports)} columns: {verified} verified derivations")
    return EXIT_OK


def _cmd_classify(opts) -> int:
    ledger_path = Path(opts.ledger)
    known = None
    if opts.log:
        queue = workspace.build_work_queue(parse_eval_log(Path(opts.log).read_bytes()))
        known = [
            taxonomy.ColumnId(w.task_id, w.model_name, c) for w in queue for c in w.columns
        ]
    if ledger_path.exists():
        ledger = taxonomy.ClassificationLedger.load(ledger_path, known)
    else:
        ledger = taxonomy.ClassificationLedger(known)
    taxonomy.record_classification(
        ledger,
        taxonomy.ColumnId(opts.task, opts.model, opts.column),
        taxonomy.ErrorLeaf(opts.category),
        reviewer=opts.reviewer,
    )
    ledger.save(ledger_path)
    print(f"ledger now holds {len(ledger)} classifications")
    return EXIT_OK


def _verdict_pairs(log_original, log_patched) -> list[tuple[str, bool, bool]]:
    def flat(path):
        out = {}
        for v in parse_eval_log(Path(path).read_bytes()):
            for m in v.model_verdicts:
                for cv in m.column_verdicts:
                    out[f"{v.task_id}/{m.model_name}/{cv.column}"] = cv.matched
        return out

    original = flat(log_original)
    patched = flat(log_patched)
    return [(key, original[key], patched.get(key, original[key])) for key in sorted(original)]


def _cmd_sample(opts) -> int:
    columns = _verdict_pairs(opts.log_original, opts.log_patched)
    exclusions: set[str] = set()
    if opts.ledger:
        ledger = taxonomy.ClassificationLedger.load(opts.ledger)
        exclusions = {
            e.column.key()
            for e in ledger.entries.values()
            if e.category is taxonomy.ErrorLeaf.GT_CALCULATION_ERROR
        }
    quotas = {}
    for pair in opts.quota:
        stratum, _, count = pair.partition("=")
        quotas[stratum] = int(count)
    result = stats.stratify(columns, exclusions)
    sample = stats.sample_stratified(result, quotas, opts.seed)
    print(json.dumps({"counts": result.counts, "sample": sample}, indent=2))
    return EXIT_OK


def _cmd_agree(opts) -> int:
    if opts.stat == "mcnemar":
        r = stats.mcnemar_yates(opts.b, opts.c)
        print(f"chi2 {r.chi2:.2f}")
        print(f"p {r.p:.6g}")
    elif opts.stat == "kappa":
        matrix = stats.AnnotationMatrix.from_csv(Path(opts.matrix).read_text(encoding="utf-8"))
        r = stats.fleiss_kappa(matrix)
        print(f"kappa {r.kappa:.3f}")
        print(f"percent_agreement {stats.round_half_up_percent(r.percent_agreement / 100)}")
    elif opts.stat == "pairwise":
        matrix = stats.AnnotationMatrix.from_csv(Path(opts.matrix).read_text(encoding="utf-8"))
        vectors = {
            rater: [row[i] for row in matrix.labels]
            for i, rater in enumerate(matrix.raters)
        }
        r = stats.pairwise_agreement(vectors)
        print(f"mean {r.mean_percent()}")
    elif opts.stat == "majority":
        labels = [x for x in opts.labels.split(",") if x]
        winner = stats.majority_vote(labels)
        print(winner if winner is not None else "no-consensus")
    return EXIT_OK


def _cmd_correct(opts) -> int:
    ledger = taxonomy.ClassificationLedger.load(opts.ledger)
    if opts.mode == "script-only":
        patch = corrector.derive_eval_patch(ledger)
        manifest = corrector.build_manifest(
            opts.bundle, ledger, opts.version, include_removals=False
        )
    elif opts.mode == "removal-only":
        patch = corrector.patch_from_preset("legacy", ledger)
        manifest = corrector.build_manifest(opts.bundle, ledger, opts.version)
    else:
        patch = corrector.derive_eval_patch(ledger)
        manifest = corrector.build_manifest(opts.bundle, ledger, opts.version)
    corrector.emit_verified_bundle(opts.bundle, patch, manifest, opts.version, opts.out)
    print(
        f"removed {manifest.columns_removed} of {manifest.columns_total} columns "
        f"({manifest.removed_fraction * 100:.1f}%); models {manifest.models_total}"
    )
    return EXIT_OK


def _cmd_report(opts) -> int:
    if not opts.log and not opts.ledger:
        raise UsageError("report needs --log and/or --ledger")
    doc = {}
    if opts.log:
        metrics = compute_metrics(parse_eval_log(Path(opts.log).read_bytes()))
        doc["metrics"] = metrics.to_dict()
        if not opts.json:
            print(
                f"srdel {metrics.srdel * 100:.2f}%  srdt {metrics.srdt * 100:.2f}% "
                f"({metrics.models_passed}/{metrics.models_total})"
            )
    if opts.ledger:
        ledger = taxonomy.ClassificationLedger.load(opts.ledger)
        table = taxonomy.tally_distribution(ledger)
        doc["distribution"] = table.to_dict()
        if not opts.json:
            print(table.render_text())
    if opts.json:
        print(json.dumps(doc, indent=2))
    return EXIT_OK


def _cmd_serve(opts) -> int:
    reports = []
    if opts.reports:
        reports = analyst.parse_reports(Path(opts.reports).read_text(encoding="utf-8"))
    known = None
    if opts.log:
        queue = workspace.build_work_queue(parse_eval_log(Path(opts.log).read_bytes()))
        known = [
            taxonomy.ColumnId(w.task_id, w.model_name, c) for w in queue for c in w.columns
        ]
    items = []
    if opts.items:
        items = json.loads(Path(opts.items).read_text(encoding="utf-8"))
    svc = service.ReviewService(
        reports=reports,
        ledger=taxonomy.ClassificationLedger(known),
        annotation_items=items,
        ledger_path=opts.ledger,
        labels_path=opts.labels,
        token=opts.token,
    )
    server = service.make_server(svc, port=opts.port)
    print(f"review service on http://127.0.0.1:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return EXIT_OK


_HANDLERS = {
    "evaluate": _cmd_evaluate,
    "audit-prep": _cmd_audit_prep,
    "analyze": _cmd_analyze,
    "classify": _cmd_classify,
    "sample": _cmd_sample,
    "agree": _cmd_agree,
    "correct": _cmd_correct,
    "report": _cmd_report,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        command = parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return _HANDLERS[command.verb](command.options)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (VeribenchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
