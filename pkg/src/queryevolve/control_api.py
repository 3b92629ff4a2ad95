"""HTTP control API for a live run.

JSON over HTTP, bound to loopback by default; this is a desk tool, not a
public service, so there is no authentication. Handlers never touch engine
state directly: mutations go through the Runner's command queue and are
acknowledged at generation boundaries.

Endpoints:
    GET  /status            current status + last generation's metrics
    GET  /population?top=k  top-k individuals with serialized queries
    GET  /history           per-generation metrics series
    GET  /labels/pending    documents waiting for a human label
    POST /pause /resume     lifecycle transitions (applied at the boundary)
    POST /stop              end the run (extension, mainly for tooling/tests)
    POST /inject            {"queries": [string]} -> 202, queued genomes
    POST /labels            {"id": string, "label": "relevant"|"irrelevant"}
    GET  /<asset>           static UI files when configured with ui_dir
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import TYPE_CHECKING
from urllib.parse import parse_qs, urlparse

from .corpus import Label
from .query import BlowupLimitExceeded, QuerySyntaxError, UnknownPhrase

if TYPE_CHECKING:  # pragma: no cover
    from .orchestrator import Runner

log = logging.getLogger(__name__)


class ControlApiServer:
    """Threaded HTTP server wrapping one Runner."""

    def __init__(self, runner: "Runner", host: str = "127.0.0.1", port: int = 0,
                 ui_dir: str | None = None):
        handler = _make_handler(runner, Path(ui_dir) if ui_dir else None)
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[:2]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)


def _make_handler(runner: "Runner", ui_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # route through logging, not stderr
            log.debug("%s - %s", self.address_string(), fmt % args)

        # -- plumbing -----------------------------------------------------

        def _send_json(self, code: int, payload) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def do_OPTIONS(self) -> None:  # CORS preflight for cross-origin dev UIs
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def _read_json(self):
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b""
            if not raw:
                return {}
            return json.loads(raw)

        # -- GET ------------------------------------------------------------

        def do_GET(self) -> None:
            url = urlparse(self.path)
            if url.path == "/status":
                self._send_json(200, runner.status_dict())
            elif url.path == "/population":
                params = parse_qs(url.query)
                top = int(params.get("top", ["10"])[0])
                self._send_json(200, {"population": runner.population_dict(top)})
            elif url.path == "/history":
                self._send_json(200, {"generations": runner.history_dict()})
            elif url.path == "/labels/pending":
                self._send_json(200, {"pending": runner.labels.pending()})
            else:
                self._serve_static(url.path)

        def _serve_static(self, path: str) -> None:
            if ui_dir is None:
                self._send_json(404, {"error": f"no such endpoint: {path}"})
                return
            relative = path.lstrip("/") or "index.html"
            target = (ui_dir / relative).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
                self._send_json(404, {"error": f"no such endpoint: {path}"})
                return
            body = target.read_bytes()
            mime = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
            self.send_response(200)
            self.send_header("Content-Type", mime)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        # -- POST -----------------------------------------------------------

        def do_POST(self) -> None:
            url = urlparse(self.path)
            try:
                if url.path == "/pause":
                    runner.request_pause()
                    self._send_json(202, {"status": "accepted"})
                elif url.path == "/resume":
                    runner.request_resume()
                    self._send_json(202, {"status": "accepted"})
                elif url.path == "/stop":
                    runner.request_stop()
                    self._send_json(202, {"status": "accepted"})
                elif url.path == "/inject":
                    self._handle_inject()
                elif url.path == "/labels":
                    self._handle_label()
                else:
                    self._send_json(404, {"error": f"no such endpoint: {url.path}"})
            except json.JSONDecodeError as exc:
                self._send_json(400, {"error": f"bad JSON body: {exc}"})

        def _handle_inject(self) -> None:
            body = self._read_json()
            queries = body.get("queries")
            if not isinstance(queries, list) or not all(isinstance(q, str) for q in queries):
                self._send_json(400, {"error": 'body must be {"queries": [string, ...]}'})
                return
            try:
                genomes = runner.inject(queries)
            except QuerySyntaxError as exc:
                self._send_json(400, {"error": str(exc), "offset": exc.offset})
            except (UnknownPhrase, BlowupLimitExceeded) as exc:
                self._send_json(400, {"error": str(exc)})
            except RuntimeError as exc:
                self._send_json(409, {"error": str(exc)})
            else:
                self._send_json(202, {"queued": [list(g) for g in genomes]})

        def _handle_label(self) -> None:
            body = self._read_json()
            doc_id = body.get("id")
            raw_label = body.get("label")
            if not isinstance(doc_id, str) or raw_label not in ("relevant", "irrelevant"):
                self._send_json(
                    400,
                    {"error": 'body must be {"id": string, "label": "relevant"|"irrelevant"}'},
                )
                return
            try:
                runner.label(doc_id, Label(raw_label))
            except KeyError:
                self._send_json(404, {"error": f"unknown document id: {doc_id}"})
            else:
                self._send_json(200, {"status": "labeled", "id": doc_id})

    return Handler
