"""HTTP service exposing the audit workflow to the review UI.

Plain-stdlib threading server. All responses are JSON except image
passthrough; verdict writes go through the store's single appender and are
durable (flushed and fsynced) before the 200 goes out.
"""

from __future__ import annotations

import json
import mimetypes
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlparse

from .audit import (AuditCase, DirectionalMatrix, Verdict, VerdictStore,
                    directional_matrix, record_verdict, summarize)
from .data import ClassRegistry
from .errors import ConfigError, UnknownCaseError, VerdictRuleError

DEFAULT_PAGE_SIZE = 50


class AuditService:
    """Request-independent state: case catalog, verdict store, static roots."""

    def __init__(self, cases: list[AuditCase], registry: ClassRegistry,
                 store: VerdictStore, images_root: Path | str | None = None,
                 ui_root: Path | str | None = None):
        self.cases = {c.id: c for c in cases}
        if len(self.cases) != len(cases):
            raise ValueError("duplicate case ids")
        self.ordered = sorted(cases, key=lambda c: (c.margin, c.id))
        self.registry = registry
        self.store = store
        self.images_root = Path(images_root) if images_root else None
        self.ui_root = Path(ui_root) if ui_root else None

    # -- queries ---------------------------------------------------------

    def case_view(self, case: AuditCase) -> dict:
        verdict = self.store.active().get(case.id)
        view = case.to_dict(self.registry)
        view["status"] = "reviewed" if verdict is not None else "pending"
        view["verdict"] = verdict.to_dict() if verdict is not None else None
        view["image_url"] = f"/images/{case.image_ref}" if case.image_ref else None
        return view

    def list_cases(self, status: str | None, origin: str | None,
                   page: int, page_size: int) -> dict:
        active = self.store.active()
        selected = []
        for case in self.ordered:
            if origin is not None and case.origin != origin:
                continue
            reviewed = case.id in active
            if status == "pending" and reviewed:
                continue
            if status == "reviewed" and not reviewed:
                continue
            selected.append(case)
        start = (page - 1) * page_size
        chunk = selected[start:start + page_size]
        return {
            "total": len(selected),
            "page": page,
            "page_size": page_size,
            "cases": [self.case_view(c) for c in chunk],
        }

    def progress(self) -> dict:
        active = self.store.active()
        reviewed = sum(1 for cid in self.cases if cid in active)
        return {
            "total": len(self.cases),
            "reviewed": reviewed,
            "pending": len(self.cases) - reviewed,
        }

    def summary(self) -> dict:
        rows = summarize(self.store, list(self.ordered))
        return {"classes": list(self.registry.names),
                "rows": [r.to_dict() for r in rows]}

    def heatmap(self) -> dict:
        matrix: DirectionalMatrix = directional_matrix(
            self.store, list(self.ordered), self.registry.C)
        return matrix.to_dict(self.registry)

    # -- mutation --------------------------------------------------------

    def submit_verdict(self, case_id: str, body: dict) -> dict:
        if body.get("case_id") not in (None, case_id):
            raise ValueError("body case_id does not match URL")
        category = body.get("category")
        reviewer = body.get("reviewer")
        if not isinstance(category, str) or not isinstance(reviewer, str) or not reviewer:
            raise ValueError("verdict requires string 'category' and 'reviewer'")
        corrected = body.get("corrected_label")
        if corrected is not None:
            if not isinstance(corrected, str):
                raise ValueError("corrected_label must be a class name string")
            self.registry.index(corrected)  # raises ConfigError when unknown
        verdict = Verdict(case_id=case_id, category=category, reviewer=reviewer,
                          ts=float(body.get("ts", time.time())),
                          corrected_label=corrected)
        record_verdict(self.store, self.cases, verdict)
        return {"ok": True, "case_id": case_id, "status": "reviewed"}


class _Handler(BaseHTTPRequestHandler):
    service: AuditService  # set by make_server

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    def _send_json(self, payload: dict, code: int = 200) -> None:
        blob = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(blob)

    def _send_error_json(self, code: int, message: str) -> None:
        self._send_json({"error": {"code": code, "message": message}}, code)

    def _send_file(self, root: Path, rel: str) -> None:
        target = (root / rel).resolve()
        if not target.is_relative_to(root.resolve()) or not target.is_file():
            self._send_error_json(404, "file not found")
            return
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        blob = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(blob)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(blob)

    def do_GET(self):  # noqa: N802  (stdlib naming)
        svc = self.service
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        query = parse_qs(url.query)

        if url.path == "/api/summary":
            self._send_json(svc.summary())
        elif url.path == "/api/heatmap":
            self._send_json(svc.heatmap())
        elif url.path == "/api/progress":
            self._send_json(svc.progress())
        elif url.path == "/api/cases":
            status = query.get("status", [None])[0]
            origin = query.get("origin", [None])[0]
            if status not in (None, "pending", "reviewed"):
                self._send_error_json(400, f"unknown status filter {status!r}")
                return
            sort = query.get("sort", ["margin"])[0]
            if sort != "margin":
                self._send_error_json(400, f"unsupported sort {sort!r}")
                return
            try:
                page = int(query.get("page", ["1"])[0])
                page_size = int(query.get("page_size", [str(DEFAULT_PAGE_SIZE)])[0])
            except ValueError:
                self._send_error_json(400, "page and page_size must be integers")
                return
            if page < 1 or page_size < 1:
                self._send_error_json(400, "page and page_size must be >= 1")
                return
            self._send_json(svc.list_cases(status, origin, page, page_size))
        elif len(parts) == 3 and parts[:2] == ["api", "cases"]:
            case = svc.cases.get(unquote(parts[2]))
            if case is None:
                self._send_error_json(404, "unknown case")
            else:
                self._send_json(svc.case_view(case))
        elif parts and parts[0] == "images":
            if svc.images_root is None:
                self._send_error_json(404, "no images root configured")
            else:
                self._send_file(svc.images_root, unquote("/".join(parts[1:])))
        elif svc.ui_root is not None:
            rel = unquote("/".join(parts)) or "index.html"
            self._send_file(svc.ui_root, rel)
        else:
            self._send_error_json(404, "unknown endpoint")

    def do_POST(self):  # noqa: N802
        svc = self.service
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        if len(parts) != 4 or parts[:2] != ["api", "cases"] or parts[3] != "verdict":
            self._send_error_json(404, "unknown endpoint")
            return
        case_id = unquote(parts[2])
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length).decode("utf-8"))
            if not isinstance(body, dict):
                raise ValueError("verdict body must be a JSON object")
            result = svc.submit_verdict(case_id, body)
        except UnknownCaseError as exc:
            self._send_error_json(404, str(exc))
        except VerdictRuleError as exc:
            self._send_error_json(409, str(exc))
        except (ValueError, KeyError, json.JSONDecodeError, ConfigError) as exc:
            self._send_error_json(400, str(exc))
        else:
            self._send_json(result)


def make_server(service: AuditService, host: str = "127.0.0.1",
                port: int = 8765) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(service: AuditService, host: str = "127.0.0.1",
                  port: int = 8765) -> None:
    server = make_server(service, host, port)
    bound = server.server_address[1]
    print(f"review service listening on http://{host}:{bound}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()


def start_background(service: AuditService, host: str = "127.0.0.1",
                     port: int = 0) -> tuple[ThreadingHTTPServer, threading.Thread]:
    """Start on an ephemeral port for tests; returns (server, thread)."""
    server = make_server(service, host, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread
