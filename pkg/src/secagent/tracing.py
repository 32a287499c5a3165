"""Append-only run observability.

Every model inference, tool call, handoff, governor trip, and operator
action becomes one immutable TraceEvent with a per-run monotonic sequence
number. Runs export as JSON lines or as a span-tree file whose parent
links form a forest rooted at the run span.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

SCHEMA_VERSION = 1

EVENT_KINDS = {
    "inference",
    "tool_call",
    "handoff",
    "interrupt",
    "governor",
    "memory",
    "operator",
}

# "token" alone would swallow usage counters like prompt_tokens.
_SECRET_KEY_RE = re.compile(
    r"(password|passwd|secret|api_key|apikey|auth_token|access_token|bearer)",
    re.IGNORECASE,
)
REDACTION_MARKER = "[redacted]"


def redact(payload: Any) -> Any:
    """Recursively replace values of secret-looking keys."""
    if isinstance(payload, dict):
        return {
            key: (REDACTION_MARKER if _SECRET_KEY_RE.search(key) else redact(value))
            for key, value in payload.items()
        }
    if isinstance(payload, list):
        return [redact(item) for item in payload]
    return payload


@dataclass
class TraceEvent:
    event_id: str
    run_id: str
    sequence: int
    kind: str
    turn: int
    interaction: int
    payload: dict[str, Any]
    started_at: int
    ended_at: int
    parent_id: str | None = None

    def to_dict(self, normalize: bool = False) -> dict[str, Any]:
        return {
            "event_id": self.event_id,
            "run_id": self.run_id,
            "sequence": self.sequence,
            "kind": self.kind,
            "turn": self.turn,
            "interaction": self.interaction,
            "payload": self.payload,
            "started_at": 0 if normalize else self.started_at,
            "ended_at": 0 if normalize else self.ended_at,
            "parent_id": self.parent_id,
        }


class Tracer:
    """Multi-producer event sink with per-run atomic sequence numbers.

    When disabled, record() is a no-op and export refuses: the run itself
    must behave identically either way.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._lock = threading.Lock()
        self._events: dict[str, list[TraceEvent]] = {}
        self._listeners: dict[str, list[Callable[[TraceEvent], None]]] = {}

    def record(
        self,
        run_id: str,
        kind: str,
        payload: dict[str, Any],
        turn: int = 0,
        interaction: int = 0,
        parent_id: str | None = None,
        started_at: int | None = None,
        ended_at: int | None = None,
    ) -> str | None:
        if not self.enabled:
            return None
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind: {kind}")
        now = time.time_ns()
        with self._lock:
            events = self._events.setdefault(run_id, [])
            sequence = len(events)
            event = TraceEvent(
                event_id=f"{run_id}/evt-{sequence}",
                run_id=run_id,
                sequence=sequence,
                kind=kind,
                turn=turn,
                interaction=interaction,
                payload=redact(payload),
                started_at=now if started_at is None else started_at,
                ended_at=now if ended_at is None else ended_at,
                parent_id=parent_id,
            )
            events.append(event)
            listeners = list(self._listeners.get(run_id, []))
        for listener in listeners:
            listener(event)
        return event.event_id

    def events(self, run_id: str) -> list[TraceEvent]:
        with self._lock:
            return list(self._events.get(run_id, []))

    def has_run(self, run_id: str) -> bool:
        with self._lock:
            return run_id in self._events

    def subscribe(self, run_id: str, listener: Callable[[TraceEvent], None]) -> None:
        with self._lock:
            self._listeners.setdefault(run_id, []).append(listener)

    def unsubscribe(self, run_id: str, listener: Callable[[TraceEvent], None]) -> None:
        with self._lock:
            listeners = self._listeners.get(run_id, [])
            if listener in listeners:
                listeners.remove(listener)

    def count(self, run_id: str, kind: str | None = None) -> int:
        return len(
            [e for e in self.events(run_id) if kind is None or e.kind == kind]
        )

    def export(
        self,
        run_id: str,
        path: str | Path,
        format: str = "jsonl",
        normalize: bool = False,
    ) -> Path:
        """Write a run's events to `path`; returns the artifact path."""
        if not self.enabled:
            raise RuntimeError("tracing is disabled; nothing to export")
        if not self.has_run(run_id):
            raise KeyError(f"unknown run: {run_id}")
        path = Path(path)
        if format == "jsonl":
            path.write_text(render_jsonl(self.events(run_id), normalize=normalize))
        elif format == "otlp_file":
            path.write_text(
                json.dumps(render_spans(run_id, self.events(run_id), normalize), indent=2)
                + "\n"
            )
        else:
            raise ValueError(f"unknown export format: {format}")
        return path


def render_jsonl(events: Iterable[TraceEvent], normalize: bool = False) -> str:
    lines = [json.dumps({"schema": SCHEMA_VERSION})]
    for event in events:
        lines.append(json.dumps(event.to_dict(normalize=normalize), sort_keys=True))
    return "\n".join(lines) + "\n"


def render_spans(
    run_id: str, events: list[TraceEvent], normalize: bool = False
) -> dict[str, Any]:
    """Render events as a span forest rooted at one synthetic run span."""
    root_id = f"{run_id}/span-root"
    spans = [
        {
            "span_id": root_id,
            "parent_span_id": None,
            "name": "run",
            "start_time_unix_nano": 0,
            "end_time_unix_nano": 0,
            "attributes": {"run_id": run_id},
        }
    ]
    for event in events:
        data = event.to_dict(normalize=normalize)
        spans.append(
            {
                "span_id": event.event_id,
                "parent_span_id": event.parent_id or root_id,
                "name": event.kind,
                "start_time_unix_nano": data["started_at"],
                "end_time_unix_nano": data["ended_at"],
                "attributes": {
                    "sequence": event.sequence,
                    "turn": event.turn,
                    "interaction": event.interaction,
                    "payload": event.payload,
                },
            }
        )
    return {"schema": SCHEMA_VERSION, "resource": {"run_id": run_id}, "spans": spans}
