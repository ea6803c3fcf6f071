import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from conftest import plant_chain
from veribench.analyst import (
    AnalysisReport,
    DeterministicBackend,
    ExternalBackend,
    Transform,
    analyze_column,
    chain_label,
    dispatch_analysis,
    enumerate_chains,
    is_legal_chain,
    parse_chain,
    verify_derivation,
    write_reports,
)
from veribench.equivalence import PRESETS
from veribench.errors import AnalysisDispatchError, ProtocolError
from veribench.evaluator import evaluate_task, load_recorded_outcomes
from veribench.synthetic import build_scale_fixture
from veribench.tabular import load_task, write_table_csv
from veribench.taxonomy import ErrorLeaf
from veribench.workspace import WorkItem, build_work_queue, materialize_environment

VERIFIED = PRESETS["verified-v1"]


class TestChainEnumeration:
    def test_identity_first(self):
        chains = enumerate_chains()
        assert chains[0] == (Transform("identity"),)

    def test_shorter_first(self):
        lengths = [len(c) for c in enumerate_chains()]
        assert lengths == sorted(lengths)

    def test_all_legal(self):
        for chain in enumerate_chains():
            assert is_legal_chain(chain)

    def test_no_duplicate_chains(self):
        chains = enumerate_chains()
        assert len(chains) == len(set(chains))

    def test_identity_only_as_singleton(self):
        for chain in enumerate_chains():
            if len(chain) > 1:
                assert all(t.kind != "identity" for t in chain)

    def test_chain_label_round_trip(self):
        for chain in enumerate_chains()[:200]:
            assert parse_chain(chain_label(chain)) == chain


@pytest.fixture(scope="module")
def scale_env(tmp_path_factory):
    root = build_scale_fixture(tmp_path_factory.mktemp("scale") / "bundle")
    task = load_task(root, "world")
    verdict = evaluate_task(task, PRESETS["legacy"])
    queue = build_work_queue([verdict])
    env = materialize_environment(task, queue, tmp_path_factory.mktemp("scaleenv"))
    return env, queue


class TestAnalyzeColumn:
    def test_growth_rate_scale_chain(self, scale_env):
        env, queue = scale_env
        report = analyze_column(env, queue[0], "gnp_growth_rate", VERIFIED)
        assert report.verified
        assert chain_label(report.derivation) == ["scale(100.0)"]
        assert report.suggested_category is ErrorLeaf.FP_FORMAT_MISMATCH
        assert report.best_match_rate == 1.0

    def test_identical_columns_identity(self, scale_env):
        env, queue = scale_env
        item = WorkItem("world", "country_growth", ("country",))
        report = analyze_column(env, item, "country", VERIFIED)
        assert report.verified
        assert chain_label(report.derivation) == ["identity"]

    def test_near_perfect_suggests_gt_error(self, tmp_path, mini_benchmark):
        recorded = load_recorded_outcomes(mini_benchmark.root / "el_outcomes.json")
        task = load_task(mini_benchmark.root, "t05")
        verdict = evaluate_task(task, PRESETS["legacy"], recorded_el=recorded)
        queue = build_work_queue([verdict])
        env = materialize_environment(task, queue, tmp_path)
        report = analyze_column(env, queue[0], "visits", VERIFIED)
        assert not report.verified
        assert report.best_match_rate >= 0.99
        assert report.suggested_category is ErrorLeaf.GT_CALCULATION_ERROR
        assert report.evidence["stats"]["best_match_rate"] < 1.0

    def test_influential_user_profile(self, tmp_path):
        # best interpretation reaches 99.74%: one anomalous row in 384 that
        # no reading of the description explains
        from veribench.tabular import (
            ColumnSeries,
            ColumnSpec,
            DataModelSpec,
            dump_data_model_specs,
            parse_cell,
        )

        rows = 384
        gt_vals = ["1" if i == 42 else "0" for i in range(rows)]
        pred_vals = ["0"] * rows
        task_dir = tmp_path / "bundle" / "tasks" / "community"
        (task_dir / "gt").mkdir(parents=True)
        (task_dir / "predicted").mkdir(parents=True)
        spec = DataModelSpec("posts", (ColumnSpec("top_user_flag"),))
        (task_dir / "data_model.yaml").write_text(dump_data_model_specs([spec]))
        for sub, vals in (("gt", gt_vals), ("predicted", pred_vals)):
            from veribench.tabular import TableArtifact

            table = TableArtifact(
                "posts",
                (ColumnSeries("top_user_flag", tuple(parse_cell(v) for v in vals)),),
                rows,
            )
            (task_dir / sub / "posts.csv").write_text(write_table_csv(table))
        task = load_task(tmp_path / "bundle", "community")
        item = WorkItem("community", "posts", ("top_user_flag",))
        env = materialize_environment(task, [item], tmp_path / "envs")
        report = analyze_column(env, item, "top_user_flag", VERIFIED)
        assert not report.verified
        assert report.best_match_rate == pytest.approx(383 / 384)
        assert round(report.best_match_rate * 100, 2) == 99.74
        assert report.suggested_category is ErrorLeaf.GT_CALCULATION_ERROR
        assert "closest" in report.diagnosis

    def test_low_match_is_unresolved(self, tmp_path, mini_benchmark):
        recorded = load_recorded_outcomes(mini_benchmark.root / "el_outcomes.json")
        task = load_task(mini_benchmark.root, "t07")
        verdict = evaluate_task(task, PRESETS["legacy"], recorded_el=recorded)
        queue = build_work_queue([verdict])
        env = materialize_environment(task, queue, tmp_path)
        report = analyze_column(env, queue[0], "num_won", VERIFIED)
        assert not report.verified
        assert report.suggested_category is None
        assert report.best_match_rate < 0.99

    def test_column_missing_from_predicted(self, scale_env, tmp_path):
        env, queue = scale_env
        pred_path = env.root / "predicted" / "country_growth.csv"
        original = pred_path.read_text()
        from veribench.tabular import load_table

        table = load_table(original, model_name="country_growth")
        dropped = type(table)(
            "country_growth", tuple(c for c in table.columns if c.name == "country"), table.row_count
        )
        pred_path.write_text(write_table_csv(dropped))
        try:
            report = analyze_column(env, queue[0], "gnp_growth_rate", VERIFIED)
            assert not report.verified
            assert report.best_match_rate == 0.0
            assert "schema" in report.evidence
        finally:
            pred_path.write_text(original)


class TestVerifyDerivation:
    def test_growth_report_verifies(self, scale_env):
        env, queue = scale_env
        report = analyze_column(env, queue[0], "gnp_growth_rate", VERIFIED)
        assert verify_derivation(report, env, VERIFIED) is True

    def test_identity_on_mismatched_fails(self, scale_env):
        env, queue = scale_env
        report = AnalysisReport(
            task_id="world",
            model_name="country_growth",
            column="gnp_growth_rate",
            diagnosis="",
            suggested_category=None,
            derivation=(Transform("identity"),),
            verified=True,
            best_match_rate=1.0,
        )
        assert verify_derivation(report, env, VERIFIED) is False
        assert report.verified is False

    def test_tampered_chain_fails(self, scale_env):
        # direct-application oracle: the wrong scale direction cannot verify
        env, queue = scale_env
        report = analyze_column(env, queue[0], "gnp_growth_rate", VERIFIED)
        report.derivation = (Transform("scale", 0.01),)
        assert verify_derivation(report, env, VERIFIED) is False

    def test_absent_column_reports_reason(self, scale_env):
        env, _ = scale_env
        report = AnalysisReport(
            task_id="world",
            model_name="country_growth",
            column="no_such_column",
            diagnosis="",
            suggested_category=None,
            derivation=(Transform("identity"),),
            verified=True,
            best_match_rate=1.0,
        )
        assert verify_derivation(report, env, VERIFIED) is False
        assert "verification_failure" in report.evidence


@pytest.fixture(scope="module")
def mini_envs(mini_benchmark, tmp_path_factory):
    recorded = load_recorded_outcomes(mini_benchmark.root / "el_outcomes.json")
    tasks = sorted(p.name for p in (mini_benchmark.root / "tasks").iterdir())
    verdicts = [
        evaluate_task(load_task(mini_benchmark.root, t), PRESETS["legacy"], recorded_el=recorded)
        for t in tasks
    ]
    queue = build_work_queue(verdicts)
    env_root = tmp_path_factory.mktemp("envs")
    environments = {
        task_id: materialize_environment(load_task(mini_benchmark.root, task_id), queue, env_root)
        for task_id in sorted({w.task_id for w in queue})
    }
    return queue, environments


class TestDispatch:
    def test_full_coverage_and_verification_split(self, mini_envs):
        queue, environments = mini_envs
        reports = dispatch_analysis(queue, DeterministicBackend(), environments, VERIFIED)
        covered = sum(len(r.covered_columns) for r in reports)
        assert covered == sum(len(w.columns) for w in queue)
        verified = sum(1 for r in reports if r.verified)
        unresolved = sum(1 for r in reports if not r.verified)
        assert verified + unresolved == covered

    def test_empty_queue(self, mini_envs):
        _, environments = mini_envs
        assert dispatch_analysis([], DeterministicBackend(), environments, VERIFIED) == []

    def test_parallelism_does_not_change_output(self, mini_envs):
        queue, environments = mini_envs
        serial = dispatch_analysis(
            queue, DeterministicBackend(), environments, VERIFIED, parallelism=1
        )
        parallel = dispatch_analysis(
            queue, DeterministicBackend(), environments, VERIFIED, parallelism=8
        )
        assert write_reports(serial) == write_reports(parallel)

    def test_planted_fp_columns_verify(self, mini_benchmark, mini_envs):
        queue, environments = mini_envs
        reports = {
            f"{r.task_id}/{r.model_name}/{r.column}": r
            for r in dispatch_analysis(queue, DeterministicBackend(), environments, VERIFIED)
        }
        for key, chain in mini_benchmark.planted_chains.items():
            assert reports[key].verified, key
            assert chain_label(reports[key].derivation) == chain, key


class _MockAnalystHandler(BaseHTTPRequestHandler):
    behavior = "valid"

    def do_POST(self):  # noqa: N802
        length = int(self.headers.get("Content-Length", 0))
        request = json.loads(self.rfile.read(length))
        item = request["work_item"]
        if self.behavior == "malformed":
            payload = b"this is not json"
        else:
            chain = ["scale(100.0)"] if self.behavior == "valid" else ["casefold"]
            doc = {
                "task_id": item["task_id"],
                "model_name": item["model_name"],
                "column": item["column"],
                "diagnosis": "scale mismatch" if self.behavior == "valid" else "bogus",
                "suggested_category": "benchmark/eval_false_positive/format_mismatch",
                "derivation": chain,
                "verified": True,
                "best_match_rate": 1.0,
            }
            payload = json.dumps(doc).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def mock_endpoint():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _MockAnalystHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/analyze"
    server.shutdown()


class TestExternalBackend:
    def test_valid_report_accepted_after_verification(self, scale_env, mock_endpoint):
        env, queue = scale_env
        _MockAnalystHandler.behavior = "valid"
        backend = ExternalBackend(endpoint=mock_endpoint)
        reports = dispatch_analysis(queue, backend, {"world": env}, VERIFIED)
        assert len(reports) == 1
        assert reports[0].verified
        assert reports[0].suggested_category is ErrorLeaf.FP_FORMAT_MISMATCH

    def test_unverifiable_chain_downgraded(self, scale_env, mock_endpoint):
        env, queue = scale_env
        _MockAnalystHandler.behavior = "wrong_chain"
        backend = ExternalBackend(endpoint=mock_endpoint)
        reports = dispatch_analysis(queue, backend, {"world": env}, VERIFIED)
        assert not reports[0].verified
        assert reports[0].suggested_category is None
        assert "downgraded" in reports[0].diagnosis

    def test_malformed_response_is_protocol_error(self, scale_env, mock_endpoint):
        env, queue = scale_env
        _MockAnalystHandler.behavior = "malformed"
        backend = ExternalBackend(endpoint=mock_endpoint, retries=0)
        with pytest.raises(AnalysisDispatchError) as excinfo:
            dispatch_analysis(queue, backend, {"world": env}, VERIFIED)
        assert isinstance(excinfo.value.failures["world"], ProtocolError)

    def test_unreachable_endpoint_isolated_per_task(self, scale_env):
        env, queue = scale_env
        backend = ExternalBackend(endpoint="http://127.0.0.1:1/analyze", retries=0, timeout=0.2)
        with pytest.raises(AnalysisDispatchError) as excinfo:
            dispatch_analysis(queue, backend, {"world": env}, VERIFIED)
        assert excinfo.value.reports == []
        assert "world" in excinfo.value.failures


class TestPlantedChainRecovery:
    def test_hundred_planted_chains(self, tmp_path):
        from veribench.tabular import ColumnSeries, TableArtifact

        rng = random.Random(20260808)
        plants = [plant_chain(rng, rows=rng.randint(5, 12)) for _ in range(100)]
        gt_cols, pred_cols = [], []
        for i, (chain, gt_cells, pred_cells) in enumerate(plants):
            gt_cols.append(ColumnSeries(f"c{i:03d}", gt_cells))
            pred_cols.append(ColumnSeries(f"c{i:03d}", pred_cells))
        # normalize lengths per column pair by padding shorter tables is not
        # needed: each column pair is written to its own single-column model
        task_dir = tmp_path / "bundle" / "tasks" / "lab"
        (task_dir / "gt").mkdir(parents=True)
        (task_dir / "predicted").mkdir(parents=True)
        from veribench.tabular import ColumnSpec, DataModelSpec, dump_data_model_specs

        specs = []
        for i, (gt, pred) in enumerate(zip(gt_cols, pred_cols)):
            name = f"m{i:03d}"
            specs.append(DataModelSpec(name, (ColumnSpec(gt.name),)))
            (task_dir / "gt" / f"{name}.csv").write_text(
                write_table_csv(TableArtifact(name, (gt,), len(gt)))
            )
            (task_dir / "predicted" / f"{name}.csv").write_text(
                write_table_csv(TableArtifact(name, (pred,), len(pred)))
            )
        (task_dir / "data_model.yaml").write_text(dump_data_model_specs(specs))
        task = load_task(tmp_path / "bundle", "lab")
        queue = [
            WorkItem("lab", f"m{i:03d}", (f"c{i:03d}",)) for i in range(len(plants))
        ]
        env = materialize_environment(task, queue, tmp_path / "envs")
        for i, (chain, _, _) in enumerate(plants):
            report = analyze_column(env, queue[i], f"c{i:03d}", VERIFIED)
            assert report.verified, (
                f"plant {i}: {chain_label(chain)} not recovered; "
                f"best {report.best_match_rate} via "
                f"{chain_label(report.derivation) if report.derivation else None}"
            )
            assert verify_derivation(report, env, VERIFIED)

    def test_minimal_chain_reported(self):
        # canonical order guarantees no scale chain when identity suffices
        chains = enumerate_chains()
        identity_index = chains.index((Transform("identity"),))
        assert identity_index == 0
