"""Shared test builders: in-memory datasets, canned completions, scripted
chat backends, and a local chat-completion HTTP server."""

from __future__ import annotations

import http.server
import json
import threading

from crscore import (
    Dataset,
    RatingSource,
    ResponseRecord,
    ScoreEntry,
    ScoreScale,
    SourceKind,
)

SCALE_1_5 = ScoreScale(min_reportable=1, max_reportable=5, atypical_floor=0)


def make_dataset(columns, scale=SCALE_1_5, groups=None, kinds=None, item_ids=None):
    """Dataset from parallel score columns.

    ``columns`` maps a column key to a value sequence; a key is a source id,
    optionally ``source@tag`` for a session-tagged column. None means the
    source did not score that response. ``groups`` maps facet name to a
    parallel sequence of group labels (None = absent).
    """
    source_order: list[str] = []
    for key in columns:
        sid = key.partition("@")[0]
        if sid not in source_order:
            source_order.append(sid)
    kinds = kinds or {}
    sources = tuple(
        RatingSource(id=sid, kind=kinds.get(sid, SourceKind.HUMAN)) for sid in source_order
    )
    n = max(len(values) for values in columns.values())
    records = []
    for i in range(n):
        scores: dict[str, list[ScoreEntry]] = {}
        for key, values in columns.items():
            value = values[i] if i < len(values) else None
            if value is None:
                continue
            sid, _, tag = key.partition("@")
            scores.setdefault(sid, []).append(ScoreEntry(value=value, session_tag=tag or None))
        row_groups = {}
        for facet, values in (groups or {}).items():
            label = values[i] if i < len(values) else None
            if label is not None:
                row_groups[facet] = label
        records.append(
            ResponseRecord(
                response_id=f"r{i + 1:04d}",
                item_id=item_ids[i] if item_ids else "item-1",
                groups=row_groups,
                scores={sid: tuple(entries) for sid, entries in scores.items()},
            )
        )
    return Dataset(scale=scale, sources=sources, records=tuple(records))


def completion_json(score, reasons=("clear thesis", "uneven evidence", "minor mechanics")):
    return json.dumps({"score": score, "reasons": [{"reason": r} for r in reasons]})


def chat_payload(content):
    return {"choices": [{"message": {"content": content}}]}


class ScriptedBackend:
    """In-process chat backend driven by a script.

    The script is either a callable(prompt) -> action or a list of actions
    consumed call by call (the last action repeats). An action is a string
    (returned) or an exception instance (raised).
    """

    def __init__(self, script):
        self._script = script
        self._lock = threading.Lock()
        self.calls = 0
        self.prompts: list[str] = []
        self.closed = False

    def complete(self, prompt):
        with self._lock:
            self.calls += 1
            self.prompts.append(prompt)
            if callable(self._script):
                action = self._script(prompt)
            else:
                action = self._script[min(self.calls - 1, len(self._script) - 1)]
        if isinstance(action, Exception):
            raise action
        return action

    def close(self):
        self.closed = True


def answer_from_prompt(prompt):
    """Recover the answer section (last tagged section) from a rendered prompt."""
    closing = prompt.rstrip().rsplit("\n", 1)[-1]
    tag = closing.strip().lstrip("</").rstrip(">")
    opening = f"<{tag}>\n"
    start = prompt.index(opening) + len(opening)
    end = prompt.index(f"\n</{tag}>", start)
    return prompt[start:end]


class _Handler(http.server.BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw) if raw else {}
        except json.JSONDecodeError:
            body = {}
        status, payload = self.server.app(self.path, body, self.headers)  # type: ignore[attr-defined]
        data = payload if isinstance(payload, bytes) else json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


class ChatServer:
    """Local HTTP chat-completion endpoint.

    ``app`` is callable(path, body_dict, headers) -> (status, payload); the
    payload is JSON-encoded unless already bytes.
    """

    def __init__(self, app):
        self._server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self._server.app = app  # type: ignore[attr-defined]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self):
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1/chat/completions"

    def close(self):
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
