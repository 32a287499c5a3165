"""Episodic and semantic long-term memory with query-time retrieval.

Desk-scale by design: an append-only JSONL store on disk and a lexical
token-overlap scorer. Embedding-backed scoring can be plugged in via the
scorer callable without adding a dependency.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

EMPTY_STORE_NOTICE = "No documents found in memory."
DEFAULT_TOP_K = 3

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> set[str]:
    return set(_TOKEN_RE.findall(text.lower()))


def overlap_score(query: str, record_text: str) -> float:
    """Normalized token overlap: shared tokens over query token count."""
    query_tokens = tokenize(query)
    if not query_tokens:
        return 0.0
    return len(query_tokens & tokenize(record_text)) / len(query_tokens)


@dataclass
class MemoryRecord:
    id: str
    kind: str  # episodic | semantic
    text: str
    source_run: str = ""
    created_at: float = 0.0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "text": self.text,
            "source_run": self.source_run,
            "created_at": self.created_at,
        }


Scorer = Callable[[str, str], float]


class MemoryStore:
    """Single-writer persistent store; records survive process restarts."""

    def __init__(self, path: str | Path, scorer: Scorer = overlap_score):
        self.path = Path(path)
        self.scorer = scorer
        self._lock = threading.Lock()
        self._records: list[MemoryRecord] = []
        self._counter = 0
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                if not line.strip():
                    continue
                data = json.loads(line)
                record = MemoryRecord(**data)
                self._records.append(record)
                number = int(record.id.lstrip("m"))
                self._counter = max(self._counter, number)

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    def add(self, kind: str, text: str, source_run: str = "") -> str:
        if kind not in ("episodic", "semantic"):
            raise ValueError(f"kind must be episodic or semantic, got {kind!r}")
        if not text.strip():
            raise ValueError("memory text must be non-empty")
        with self._lock:
            self._counter += 1
            record = MemoryRecord(
                id=f"m{self._counter}",
                kind=kind,
                text=text,
                source_run=source_run,
                created_at=time.time(),
            )
            self._records.append(record)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a") as fh:
                fh.write(json.dumps(record.to_dict()) + "\n")
        return record.id

    def rank(self, query: str) -> list[tuple[float, MemoryRecord]]:
        """All records scored against the query; ties break by id ascending."""
        with self._lock:
            records = list(self._records)
        scored = [(self.scorer(query, record.text), record) for record in records]
        scored.sort(key=lambda item: (-item[0], int(item[1].id.lstrip("m"))))
        return scored

    def query(self, query: str, top_k: int = DEFAULT_TOP_K) -> str:
        """Formatted top-k matches, or the fixed empty-store notice."""
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        if len(self) == 0:
            return EMPTY_STORE_NOTICE
        lines = []
        for score, record in self.rank(query)[:top_k]:
            lines.append(f"[{record.id}] ({record.kind}, score={score:.3f}) {record.text}")
        return "\n".join(lines)


def record_kinds_for_mode(mode: str | None) -> set[str]:
    """Which kinds the memory presets record, per the CAI_MEMORY mode."""
    if mode == "all":
        return {"episodic", "semantic"}
    if mode in ("episodic", "semantic"):
        return {mode}
    return set()
