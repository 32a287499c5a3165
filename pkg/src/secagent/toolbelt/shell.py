"""Command execution with session management and safe wrapped commands."""

from __future__ import annotations

import shlex
import shutil
import subprocess
from pathlib import Path

from .environment import ExecutionEnvironment, quote
from .registry import ToolError, ToolOutput, truncate_output
from .sessions import SessionClosedError, SessionManager

DEFAULT_COMMAND_TIMEOUT = 60.0

# Programs whose invocation opens a persistent interactive session.
INTERACTIVE_PROGRAMS = {
    "ssh",
    "nc",
    "netcat",
    "python",
    "python3",
    "telnet",
    "ftp",
    "mysql",
    "psql",
}


class ShellExecutor:
    """Runs commands in a resolved execution environment.

    Regular commands run to completion; interactive ones create or reuse
    a Session keyed by hint (or by identical command line) and return the
    new transcript chunk plus the session id.
    """

    def __init__(
        self,
        environment: ExecutionEnvironment | None = None,
        sessions: SessionManager | None = None,
        interactive_programs: set[str] | None = None,
        timeout: float = DEFAULT_COMMAND_TIMEOUT,
    ):
        self.environment = environment or ExecutionEnvironment(kind="local")
        self.sessions = sessions or SessionManager()
        self.interactive_programs = (
            INTERACTIVE_PROGRAMS if interactive_programs is None else interactive_programs
        )
        self.timeout = timeout

    def is_interactive(self, command: str) -> bool:
        try:
            first = shlex.split(command)[0]
        except (ValueError, IndexError):
            return False
        return Path(first).name in self.interactive_programs

    def run(
        self,
        command: str,
        session_hint: str | None = None,
        cwd: str | None = None,
        extra_env: dict[str, str] | None = None,
    ) -> ToolOutput:
        if not command.strip():
            raise ToolError("empty command")

        if session_hint:
            session = self.sessions.get(session_hint)
            if session is None:
                raise ToolError(f"unknown session: {session_hint}")
            try:
                session.send(command)
            except SessionClosedError:
                raise ToolError(f"session closed: {session_hint}") from None
            output = truncate_output(session.read_new())
            output.session_id = session.session_id
            return output

        if self.is_interactive(command):
            session = self.sessions.find_by_command(command)
            if session is None:
                session = self.sessions.create(command, self.environment.wrap(command))
            output = truncate_output(session.read_new())
            output.session_id = session.session_id
            return output

        return self._run_once(command, cwd=cwd, extra_env=extra_env)

    def _run_once(
        self,
        command: str,
        cwd: str | None = None,
        extra_env: dict[str, str] | None = None,
    ) -> ToolOutput:
        import os

        env = None
        if extra_env:
            env = {**os.environ, **extra_env}
        try:
            proc = subprocess.run(
                self.environment.wrap(command),
                capture_output=True,
                timeout=self.timeout,
                cwd=cwd,
                env=env,
            )
        except subprocess.TimeoutExpired as exc:
            partial = (exc.stdout or b"").decode("utf-8", errors="replace")
            output = truncate_output(partial + f"\n[timeout after {self.timeout}s]")
            output.exit_status = -1
            return output
        except OSError as exc:
            raise ToolError(f"spawn failed: {exc}") from None
        text = proc.stdout.decode("utf-8", errors="replace")
        stderr = proc.stderr.decode("utf-8", errors="replace")
        if stderr:
            text = text + stderr
        output = truncate_output(text)
        output.exit_status = proc.returncode
        return output


# Safe command templates for wrapped tools; values are shell-quoted, never
# interpolated as raw metacharacters.
_WRAPPED_TEMPLATES = {
    "curl": ("curl", lambda a: f"curl -s {quote(a['url'])}"),
    "wget": ("wget", lambda a: f"wget -q -O - {quote(a['url'])}"),
    "nmap": ("nmap", lambda a: f"nmap {quote(a.get('options', '-F'))} {quote(a['target'])}"),
    "netcat": ("nc", lambda a: f"nc -z -v {quote(a['target'])} {quote(str(a.get('port', '')))}"),
    "netstat": ("netstat", lambda a: "netstat -tuln"),
    "list_dir": ("ls", lambda a: f"ls -la {quote(a.get('path', '.'))}"),
    "cat_file": ("cat", lambda a: f"cat {quote(a['path'])}"),
    "pwd_command": ("pwd", lambda a: "pwd"),
    "find_file": ("find", lambda a: f"find {quote(a.get('path', '.'))} -name {quote(a['name'])}"),
}

WRAPPED_TOOLS = sorted(_WRAPPED_TEMPLATES)


def wrapped_command(
    tool: str, args: dict, executor: ShellExecutor, cwd: str | None = None
) -> ToolOutput:
    """Expand a fixed template for one of the wrapped tools and run it."""
    if tool not in _WRAPPED_TEMPLATES:
        raise ToolError(f"unknown wrapped tool: {tool}")
    binary, template = _WRAPPED_TEMPLATES[tool]
    if executor.environment.kind == "local" and shutil.which(binary) is None:
        raise ToolError(f"tool unavailable: {binary} not found on host")
    try:
        command = template(args)
    except KeyError as exc:
        raise ToolError(f"missing required argument: {exc.args[0]}") from None
    return executor.run(command, cwd=cwd)
