"""HTTP API backing the audit console.

Serves analysis reports and blinded annotation items, accepts taxonomy
classifications and equivalence labels, and exposes live agreement
statistics.  State is kept in memory behind a single writer lock and
persisted to append-only JSON Lines files that are replayed on restart, so
no database is involved.

Blinding is structural: the payload for an equivalence-annotation item is
assembled from an allowlist of fields, so stratum and script verdicts can
never leak into a response even if present on the stored item.
"""
from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .analyst import AnalysisReport
from .errors import UndefinedKappaError
from .stats import AnnotationMatrix, StratumAssignment, fleiss_kappa, sample_stratified
from .taxonomy import ClassificationLedger, ColumnId, ErrorLeaf

EQUIVALENCE_LABELS = ("equivalent", "not_equivalent")
#: The only fields an equivalence annotator may see.
BLINDED_FIELDS = ("item", "gt_values", "pred_values", "description")

SESSION_TAXONOMY = "taxonomy"
SESSION_EQUIVALENCE = "equivalence"


@dataclass
class Session:
    session_id: str
    kind: str
    items: list[str]
    blinding: bool
    annotators: set = field(default_factory=set)
    labels: dict = field(default_factory=dict)  # (item, annotator) -> label


class ReviewService:
    """Route handler plus state; usable directly in tests or behind HTTP."""

    def __init__(
        self,
        reports: list[AnalysisReport] | None = None,
        ledger: ClassificationLedger | None = None,
        annotation_items: list[dict] | None = None,
        ledger_path: Path | str | None = None,
        labels_path: Path | str | None = None,
        token: str = "",
    ):
        self.lock = threading.Lock()
        self.token = token
        self.reports: dict[str, AnalysisReport] = {}
        for report in reports or []:
            key = ColumnId(report.task_id, report.model_name, report.column).key()
            self.reports[key] = report
        self.ledger = ledger if ledger is not None else ClassificationLedger()
        self.items: dict[str, dict] = {
            str(item["item"]): item for item in (annotation_items or [])
        }
        self.sessions: dict[str, Session] = {}
        self._session_counter = 0
        self.ledger_path = Path(ledger_path) if ledger_path else None
        self.labels_path = Path(labels_path) if labels_path else None
        self._replay()

    # -- persistence ------------------------------------------------------

    def _replay(self) -> None:
        if self.ledger_path and self.ledger_path.exists():
            for line in self.ledger_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                doc = json.loads(line)
                self.ledger.record(
                    ColumnId(doc["task_id"], doc["model_name"], doc["column"]),
                    ErrorLeaf(doc["category"]),
                    doc.get("reviewer", ""),
                    doc.get("source_report", ""),
                    doc.get("timestamp"),
                )
        if self.labels_path and self.labels_path.exists():
            for line in self.labels_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                doc = json.loads(line)
                if doc.get("event") == "session":
                    self._register_session(
                        doc["session"], doc["kind"], list(doc["items"])
                    )
                    continue
                session = self._ensure_session_for_replay(doc["session"])
                session.labels[(doc["item"], doc["annotator"])] = doc["label"]
                session.annotators.add(doc["annotator"])

    def _register_session(self, session_id: str, kind: str, items: list[str]) -> Session:
        session = Session(session_id, kind, items, blinding=kind == SESSION_EQUIVALENCE)
        self.sessions[session_id] = session
        match = re.match(r"s(\d+)$", session_id)
        if match:
            self._session_counter = max(self._session_counter, int(match.group(1)))
        return session

    def _ensure_session_for_replay(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            self._register_session(session_id, SESSION_EQUIVALENCE, [])
        return self.sessions[session_id]

    def _append(self, path: Path | None, doc: dict) -> None:
        if path is None:
            return
        with path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(doc) + "\n")

    # -- routing ----------------------------------------------------------

    def handle(self, method: str, path: str, body: dict | None = None) -> tuple[int, dict]:
        """Dispatch one request; returns (status, JSON-serializable body)."""
        body = body or {}
        parts = [p for p in path.split("?")[0].split("/") if p]
        query = {}
        if "?" in path:
            for pair in path.split("?", 1)[1].split("&"):
                if "=" in pair:
                    key, _, value = pair.partition("=")
                    query[key] = value
        try:
            if method == "POST" and parts == ["session"]:
                return self._create_session(body)
            if method == "GET" and len(parts) == 2 and parts[0] == "queue":
                return self._queue(parts[1], query.get("annotator", "anonymous"))
            if method == "GET" and len(parts) == 4 and parts[0] == "report":
                return self._report(parts[1], parts[2], parts[3])
            if method == "POST" and parts == ["classify"]:
                return self._classify(body)
            if method == "POST" and parts == ["label"]:
                return self._label(body)
            if method == "GET" and len(parts) == 2 and parts[0] == "agreement":
                return self._agreement(parts[1])
            if method == "GET" and len(parts) == 2 and parts[0] == "labels":
                return self._export_labels(parts[1])
        except KeyError as exc:
            return 422, {"error": f"missing field {exc}"}
        return 404, {"error": f"no route for {method} {path}"}

    # -- endpoint implementations ----------------------------------------

    def _create_session(self, body: dict) -> tuple[int, dict]:
        kind = body.get("kind", SESSION_EQUIVALENCE)
        if kind not in (SESSION_TAXONOMY, SESSION_EQUIVALENCE):
            return 422, {"error": f"unknown session kind '{kind}'"}
        with self.lock:
            self._session_counter += 1
            session_id = f"s{self._session_counter}"
            if kind == SESSION_TAXONOMY:
                items = sorted(self.reports)
            else:
                quotas = {str(k): int(v) for k, v in body.get("quotas", {}).items()}
                seed = int(body.get("seed", 0))
                if quotas:
                    assignments = [
                        StratumAssignment(
                            item_id,
                            item.get("stratum", "A"),
                            bool(item.get("original_verdict", True)),
                            bool(item.get("patched_verdict", True)),
                        )
                        for item_id, item in self.items.items()
                    ]
                    items = sample_stratified(assignments, quotas, seed)
                else:
                    items = sorted(self.items)
            self._register_session(session_id, kind, list(items))
            self._append(
                self.labels_path,
                {"event": "session", "session": session_id, "kind": kind, "items": list(items)},
            )
        return 200, {"session": session_id, "items": len(items)}

    def _queue(self, session_id: str, annotator: str) -> tuple[int, dict]:
        session = self.sessions.get(session_id)
        if session is None:
            return 404, {"error": f"unknown session '{session_id}'"}
        if session.kind == SESSION_TAXONOMY:
            for key in session.items:
                task_id, model_name, column = key.split("/", 2)
                if ColumnId(task_id, model_name, column) in self.ledger.entries:
                    continue
                report = self.reports[key]
                return 200, {
                    "item": key,
                    "task_id": report.task_id,
                    "model_name": report.model_name,
                    "column": report.column,
                    "diagnosis": report.diagnosis,
                    "suggested_category": (
                        report.suggested_category.value
                        if report.suggested_category
                        else None
                    ),
                    "verified": report.verified,
                    "best_match_rate": report.best_match_rate,
                    "evidence": report.evidence,
                    "categories": [leaf.value for leaf in ErrorLeaf],
                    "remaining": sum(
                        1
                        for k in session.items
                        if ColumnId(*k.split("/", 2)) not in self.ledger.entries
                    ),
                }
            return 200, {"done": True}
        for item_id in session.items:
            if (item_id, annotator) in session.labels:
                continue
            item = self.items.get(item_id)
            if item is None:
                continue
            payload = {k: item[k] for k in BLINDED_FIELDS if k in item}
            payload["item"] = item_id
            payload["labels"] = list(EQUIVALENCE_LABELS)
            payload["remaining"] = sum(
                1 for i in session.items if (i, annotator) not in session.labels
            )
            return 200, payload
        return 200, {"done": True, "export": f"/labels/{session_id}"}

    def _report(self, task_id: str, model_name: str, column: str) -> tuple[int, dict]:
        key = ColumnId(task_id, model_name, column).key()
        report = self.reports.get(key)
        if report is None:
            return 404, {"error": f"no report for '{key}'"}
        return 200, report.to_dict()

    def _classify(self, body: dict) -> tuple[int, dict]:
        try:
            category = ErrorLeaf(body["category"])
        except ValueError:
            return 422, {
                "error": f"invalid category '{body.get('category')}'",
                "categories": [leaf.value for leaf in ErrorLeaf],
            }
        column = ColumnId(body["task_id"], body["model_name"], body["column"])
        if self.ledger.known_columns is not None and column not in self.ledger.known_columns:
            return 404, {"error": f"unknown column '{column.key()}'"}
        with self.lock:
            entry = self.ledger.record(
                column,
                category,
                reviewer=body.get("reviewer", "anonymous"),
                source_report=body.get("source_report", ""),
            )
            self._append(self.ledger_path, entry.to_dict())
        return 200, {"recorded": True, "ledger_size": len(self.ledger)}

    def _label(self, body: dict) -> tuple[int, dict]:
        session = self.sessions.get(body["session"])
        if session is None:
            return 404, {"error": f"unknown session '{body.get('session')}'"}
        item = body["item"]
        annotator = body.get("annotator", "anonymous")
        label = body["label"]
        if label not in EQUIVALENCE_LABELS:
            return 422, {"error": f"label must be one of {EQUIVALENCE_LABELS}"}
        if item not in session.items:
            return 404, {"error": f"item '{item}' not in session"}
        with self.lock:
            if (item, annotator) in session.labels:
                return 409, {"error": "duplicate label for this (session, item, annotator)"}
            session.labels[(item, annotator)] = label
            session.annotators.add(annotator)
            self._append(
                self.labels_path,
                {
                    "session": session.session_id,
                    "item": item,
                    "annotator": annotator,
                    "label": label,
                    "timestamp": datetime.now(timezone.utc).isoformat(),
                },
            )
        return 200, {"recorded": True}

    def _complete_matrix(self, session: Session) -> AnnotationMatrix | None:
        raters = tuple(sorted(session.annotators))
        if len(raters) < 2:
            return None
        complete = [
            item
            for item in session.items
            if all((item, r) in session.labels for r in raters)
        ]
        if not complete:
            return None
        return AnnotationMatrix(
            items=tuple(complete),
            raters=raters,
            labels=tuple(
                tuple(session.labels[(item, r)] for r in raters) for item in complete
            ),
        )

    def _agreement(self, session_id: str) -> tuple[int, dict]:
        session = self.sessions.get(session_id)
        if session is None:
            return 404, {"error": f"unknown session '{session_id}'"}
        matrix = self._complete_matrix(session)
        if matrix is None:
            return 200, {
                "kappa": None,
                "percent_agreement": None,
                "items_complete": 0,
                "raters": sorted(session.annotators),
            }
        try:
            result = fleiss_kappa(matrix)
            kappa, percent = result.kappa, result.percent_agreement
        except UndefinedKappaError:
            kappa, percent = None, 100.0
        return 200, {
            "kappa": kappa,
            "percent_agreement": percent,
            "items_complete": len(matrix.items),
            "raters": list(matrix.raters),
        }

    def _export_labels(self, session_id: str) -> tuple[int, dict]:
        session = self.sessions.get(session_id)
        if session is None:
            return 404, {"error": f"unknown session '{session_id}'"}
        matrix = self._complete_matrix(session)
        if matrix is None:
            return 200, {"items": [], "raters": sorted(session.annotators), "labels": []}
        return 200, {
            "items": list(matrix.items),
            "raters": list(matrix.raters),
            "labels": [list(row) for row in matrix.labels],
        }


def make_handler(service: ReviewService):
    class Handler(BaseHTTPRequestHandler):
        def _respond(self, status: int, doc: dict) -> None:
            payload = json.dumps(doc).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type, Authorization")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(payload)

        def _authorized(self) -> bool:
            if not service.token:
                return True
            return self.headers.get("Authorization", "") == f"Bearer {service.token}"

        def do_OPTIONS(self):  # noqa: N802 - http.server API
            self._respond(204, {})

        def do_GET(self):  # noqa: N802
            if not self._authorized():
                self._respond(401, {"error": "unauthorized"})
                return
            status, doc = service.handle("GET", self.path)
            self._respond(status, doc)

        def do_POST(self):  # noqa: N802
            if not self._authorized():
                self._respond(401, {"error": "unauthorized"})
                return
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b"{}"
            try:
                body = json.loads(raw)
            except json.JSONDecodeError:
                self._respond(400, {"error": "request body is not valid JSON"})
                return
            status, doc = service.handle("POST", self.path, body)
            self._respond(status, doc)

        def log_message(self, *args):  # quiet by default
            pass

    return Handler


def make_server(service: ReviewService, host: str = "127.0.0.1", port: int = 0):
    return ThreadingHTTPServer((host, port), make_handler(service))
