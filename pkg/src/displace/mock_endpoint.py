"""A local chat-completions endpoint with scripted replies, for tests and demos.

The server runs in a background thread on ``127.0.0.1``. A *responder*
maps the decoded request payload to ``(status, body, delay_seconds)``; the
helpers below build the common replies.

Example
-------
>>> import math
>>> from displace.mock_endpoint import MockEndpoint, fixed_logprobs
>>> with MockEndpoint(fixed_logprobs({"1": math.log(0.86), "2": math.log(0.14)})) as ep:
...     url = ep.url  # pass to classify_pair
"""

from __future__ import annotations

import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

Responder = Callable[[dict], tuple]


def completion_body(token_logprobs: dict[str, float] | None, model: str = "mock-model", chosen: str | None = None) -> dict:
    """Response body whose first generated position offers ``token_logprobs``.

    ``None`` omits the ``logprobs`` field entirely.
    """
    if token_logprobs is None:
        text = chosen or "1"
        return {"model": model, "choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]}
    if chosen is None:
        chosen = max(token_logprobs, key=token_logprobs.get)
    top = [{"token": t, "logprob": lp} for t, lp in token_logprobs.items()]
    position = {"token": chosen, "logprob": token_logprobs[chosen], "top_logprobs": top}
    return {
        "model": model,
        "choices": [
            {
                "index": 0,
                "message": {"role": "assistant", "content": chosen},
                "logprobs": {"content": [position]},
                "finish_reason": "stop",
            }
        ],
    }


def fixed_logprobs(token_logprobs: dict[str, float] | None, model: str = "mock-model", delay: float = 0.0) -> Responder:
    """Responder giving the same reply to every request."""
    body = completion_body(token_logprobs, model)
    return lambda payload: (200, body, delay)


def prompt_keyed(table: Callable[[str], tuple], model: str = "mock-model") -> Responder:
    """Responder driven by the prompt text.

    ``table(prompt)`` returns ``(p_theory, delay)`` for a normal reply or
    ``(status_code, delay)`` with an ``int`` status for an error reply.
    """

    def respond(payload):
        prompt = payload["messages"][-1]["content"]
        value, delay = table(prompt)
        if isinstance(value, int):
            return value, {"error": {"message": "scripted failure"}}, delay
        p = float(value)
        lps = {"1": math.log(p) if p > 0 else -math.inf, "2": math.log1p(-p) if p < 1 else -math.inf}
        lps = {k: v for k, v in lps.items() if v != -math.inf}
        return 200, completion_body(lps, model), delay

    return respond


class MockEndpoint:
    """Threaded HTTP server answering ``POST /v1/chat/completions``.

    ``requests`` records every decoded payload in arrival order together
    with its ``Authorization`` header.
    """

    def __init__(self, responder: Responder):
        self.responder = responder
        self.requests: list[dict] = []
        self.headers: list[str | None] = []
        self._lock = threading.Lock()
        owner = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                try:
                    payload = json.loads(self.rfile.read(length) or b"{}")
                except ValueError:
                    self._send(400, {"error": {"message": "invalid JSON"}})
                    return
                with owner._lock:
                    owner.requests.append(payload)
                    owner.headers.append(self.headers.get("Authorization"))
                if not self.path.rstrip("/").endswith("/chat/completions"):
                    self._send(404, {"error": {"message": "not found"}})
                    return
                status, body, delay = owner.responder(payload)
                if delay:
                    threading.Event().wait(delay)
                self._send(status, body)

            def _send(self, status, body):
                data = json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, args=(0.05,), daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1"

    def start(self) -> "MockEndpoint":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
