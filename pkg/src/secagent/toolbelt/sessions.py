"""Persistent interactive subprocess sessions.

Interactive programs (ssh, netcat, database shells...) keep running
between tool calls; each lives in a Session with an append-only output
transcript and a stable id. Calls targeting one session are serialized.
"""

from __future__ import annotations

import subprocess
import threading
import time

OUTPUT_SETTLE_SECONDS = 0.25
OUTPUT_WAIT_SECONDS = 3.0


class SessionClosedError(RuntimeError):
    pass


class Session:
    """One live interactive process with an append-only transcript."""

    def __init__(self, session_id: str, command_line: str, argv: list[str]):
        self.session_id = session_id
        self.command_line = command_line
        self._transcript = bytearray()
        self._read_cursor = 0
        self._lock = threading.Lock()
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
        )
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        stream = self._proc.stdout
        while True:
            chunk = stream.read1(65536)
            if not chunk:
                break
            with self._lock:
                self._transcript.extend(chunk)

    @property
    def live(self) -> bool:
        return self._proc.poll() is None

    @property
    def transcript(self) -> str:
        with self._lock:
            return self._transcript.decode("utf-8", errors="replace")

    def send(self, line: str) -> None:
        if not self.live:
            raise SessionClosedError(f"session closed: {self.session_id}")
        self._proc.stdin.write((line.rstrip("\n") + "\n").encode())
        self._proc.stdin.flush()

    def read_new(self, wait: float = OUTPUT_WAIT_SECONDS) -> str:
        """Output appended since the previous read; waits for it to settle."""
        deadline = time.monotonic() + wait
        last_len = -1
        while time.monotonic() < deadline:
            with self._lock:
                current = len(self._transcript)
            if current > self._read_cursor and current == last_len:
                break
            last_len = current
            if not self.live and current == last_len:
                break
            time.sleep(OUTPUT_SETTLE_SECONDS)
        with self._lock:
            chunk = bytes(self._transcript[self._read_cursor:])
            self._read_cursor = len(self._transcript)
        return chunk.decode("utf-8", errors="replace")

    def close(self) -> None:
        if self.live:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()


class SessionManager:
    """Creates, reuses, and serializes access to interactive sessions."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._counter = 0
        self._lock = threading.Lock()

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)

    def find_by_command(self, command_line: str) -> Session | None:
        with self._lock:
            for session in self._sessions.values():
                if session.command_line == command_line and session.live:
                    return session
        return None

    def create(self, command_line: str, argv: list[str]) -> Session:
        with self._lock:
            self._counter += 1
            session_id = f"S{self._counter}"
        session = Session(session_id, command_line, argv)
        with self._lock:
            self._sessions[session_id] = session
        return session

    def close_all(self) -> None:
        with self._lock:
            sessions = list(self._sessions.values())
        for session in sessions:
            session.close()
