"""A canned-response HTTP endpoint speaking the remote-model wire contract.

Used by tests and demos; it stands in for a hosted model.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Mapping


class CannedEndpoint:
    """Serve ``responses[sample_id]`` on ``127.0.0.1``.

    ``delays`` holds per-sample sleeps in seconds (to provoke client
    timeouts) and ``fail`` names samples answered with HTTP 500. Unknown
    samples get 404. Use as a context manager; ``url`` is valid inside.
    """

    def __init__(self, responses: Mapping[str, str], delays: Mapping[str, float] | None = None,
                 fail: set[str] | frozenset[str] = frozenset()):
        self.responses = dict(responses)
        self.delays = dict(delays or {})
        self.fail = set(fail)
        self.calls: list[str] = []
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/generate"

    def _handler(self):
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                n = int(self.headers.get("Content-Length", 0))
                try:
                    body = json.loads(self.rfile.read(n))
                    sid = body["sample_id"]
                except (ValueError, KeyError, TypeError):
                    return self._send(400, {"error": "bad request"})
                with outer._lock:
                    outer.calls.append(sid)
                if sid in outer.delays:
                    time.sleep(outer.delays[sid])
                if sid in outer.fail:
                    return self._send(500, {"error": "injected failure"})
                if sid not in outer.responses:
                    return self._send(404, {"error": f"no canned response for {sid}"})
                self._send(200, {"sample_id": sid, "text": outer.responses[sid]})

            def _send(self, status, payload):
                data = json.dumps(payload).encode()
                try:
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass  # client gave up (timeout)

        return Handler

    def __enter__(self) -> "CannedEndpoint":
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), self._handler())
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join()
