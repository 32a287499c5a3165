"""The operator's terminal.

Lines starting with "/" are commands, "$" runs a quick shell command,
anything else is a task for the active agent. Ctrl+C interrupts a live
run; a second Ctrl+C at the idle prompt exits.
"""

from __future__ import annotations

import shlex
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

from .app import App
from .config import ConfigError, load_config
from .mcp import McpError
from .patterns import PatternError, build_pattern, load_preset
from .tracing import render_jsonl

HISTORY_LIMIT = 1000
HISTORY_FILENAME = ".secagent_history"

VERBS = {
    "agent": "select or list agents",
    "model": "switch the session model",
    "workspace": "get or set the workspace",
    "config": "manage environment variables",
    "mcp": "load external tool servers",
    "memory": "query or extend long-term memory",
    "history": "show the conversation history",
    "compact": "AI-powered conversation summary",
    "flush": "clear conversation history",
    "parallel": "manage the parallel run roster",
    "shell": "run a shell command",
    "virt": "delegate to the container runtime CLI",
    "help": "show available commands",
}

EXIT_CLEAN = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUN_ERROR = 2


class CommandError(Exception):
    pass


@dataclass
class Command:
    verb: str
    args: list[str]
    raw: str


@dataclass
class TaskMessage:
    text: str


@dataclass
class ShellLine:
    command: str


def parse_line(line: str) -> Command | TaskMessage | ShellLine:
    """Classify one input line: slash command, $-shell, or task message."""
    stripped = line.strip()
    if not stripped:
        raise CommandError("empty line")
    if stripped.startswith("$"):
        return ShellLine(stripped[1:].strip())
    if stripped.startswith("/"):
        parts = stripped[1:].split()
        if not parts:
            raise CommandError(_help_hint("/"))
        verb, args = parts[0], parts[1:]
        if verb not in VERBS:
            raise CommandError(_help_hint(verb))
        return Command(verb=verb, args=args, raw=line)
    return TaskMessage(stripped)


def parse_input(lines: list[str]) -> Command | TaskMessage | ShellLine:
    """Multi-line input joins with newlines preserved into one task."""
    if len(lines) == 1:
        return parse_line(lines[0])
    return TaskMessage("\n".join(lines).strip())


def _help_hint(verb: str) -> str:
    return f"unknown command {verb!r}; available: " + ", ".join(sorted(VERBS))


class Repl:
    """Dispatches parsed commands against one App session."""

    def __init__(self, app: App):
        self.app = app
        self.parallel_roster: list[str] = []
        self.session_state = None  # lazily created on first task

    # -- rendering helpers ----------------------------------------------

    def status_bar(self) -> str:
        spend = 0.0
        turns = 0
        if self.session_state is not None:
            spend = self.session_state.meter.total_cost
            turns = self.session_state.turn_count
        return (
            f"{self.app.active_agent} | {self.app.model_ref.model_name} | "
            f"turns {turns} | ${spend:.4f}"
        )

    # -- command dispatch ------------------------------------------------

    def dispatch(self, command: Command) -> str:
        handler = getattr(self, f"_cmd_{command.verb}")
        return handler(command.args)

    def handle_line(self, line: str) -> str:
        """Parse and execute one line; returns the rendered output."""
        parsed = parse_line(line)
        if isinstance(parsed, Command):
            return self.dispatch(parsed)
        if isinstance(parsed, ShellLine):
            return self._run_shell(parsed.command)
        return self.run_task(parsed.text)

    def _run_shell(self, command: str) -> str:
        output = self.app.tools.dispatch(
            "generic_linux_command", {"command": command}
        )
        return output.text

    # -- tasks -----------------------------------------------------------

    def _ensure_state(self):
        from .engine import RunState

        if self.session_state is None:
            self.session_state = RunState(
                run_id="session",
                active_agent=self.app.agents.get(self.app.active_agent),
            )
        return self.session_state

    def run_task(self, text: str) -> str:
        if self.parallel_roster:
            return self._run_parallel_task(text)
        state = self._ensure_state()
        handle = self.app.runs.start(
            self.app.active_agent,
            text,
            max_interactions=self.app.max_interactions,
            state=state,
        )
        try:
            handle.done.wait()
        except KeyboardInterrupt:
            state.interrupt()
            handle.done.wait()
        if handle.status == "error":
            raise CommandError(f"run failed: {handle.error}")
        turn = handle.turn
        last = next(
            (m for m in reversed(state.history) if m.role == "assistant"), None
        )
        reply = last.content if last else ""
        return f"{reply}\n[{turn.end_reason} after {len(turn.interactions)} interaction(s)]"

    def _run_parallel_task(self, text: str) -> str:
        from .patterns import run_pattern

        agents = [self.app.agents.get(name) for name in self.parallel_roster]
        pattern = build_pattern(
            "parallel",
            agents,
            [],
            entry=self.parallel_roster[0],
            registry=self.app.agents,
            context="split",
        )
        result = run_pattern(
            self.app.engine, pattern, text,
            max_interactions=self.app.max_interactions,
        )
        lines = []
        for outcome in result.outcomes:
            status = outcome.error or (outcome.turn.end_reason if outcome.turn else "?")
            lines.append(f"{outcome.member}: {status}")
        return "\n".join(lines)

    # -- verb handlers ---------------------------------------------------

    def _cmd_agent(self, args: list[str]) -> str:
        from .agents import ROSTER, resolve_roster_selector

        if not args or args[0] == "list":
            rows = [
                f"{number:>3}  {name}{'  *' if name == self.app.active_agent else ''}"
                for number, name, _, _ in ROSTER
            ]
            return "\n".join(rows)
        selector = args[1] if args[0] == "select" and len(args) > 1 else args[0]
        name = resolve_roster_selector(selector)
        if name is None or not self.app.agents.has(name):
            raise CommandError(
                f"unknown agent {selector!r}; run /agent list for the roster"
            )
        self.app.active_agent = name
        if self.session_state is not None:
            self.session_state.request_agent(name)
        return f"active agent: {name}"

    def _cmd_model(self, args: list[str]) -> str:
        if not args:
            return f"model: {self.app.model_ref.model_name}"
        ref = self.app.set_model(args[0])
        return f"model: {ref.model_name} (provider {ref.provider_tag})"

    def _cmd_workspace(self, args: list[str]) -> str:
        if not args or args[0] == "get":
            return str(self.app.workspace)
        if args[0] == "set" and len(args) > 1:
            self.app.config_session.set("CAI_WORKSPACE", args[1])
            from .toolbelt import workspace_root

            self.app.workspace = workspace_root(self.app.config)
            self.app.workspace.mkdir(parents=True, exist_ok=True)
            return str(self.app.workspace)
        raise CommandError("usage: /workspace [get|set NAME]")

    def _cmd_config(self, args: list[str]) -> str:
        if not args or args[0] == "list":
            rows = self.app.config_session.list()
            width = max(len(key) for key, _, _ in rows)
            return "\n".join(
                f"{key:<{width}}  {value or '-':<24} ({source})"
                for key, value, source in rows
            )
        if args[0] == "get" and len(args) > 1:
            return f"{args[1]}={self.app.config_session.get(args[1])}"
        if args[0] == "set" and len(args) > 2:
            try:
                self.app.config_session.set(args[1], " ".join(args[2:]))
            except ConfigError as exc:
                raise CommandError(str(exc)) from None
            return f"{args[1]}={self.app.config_session.get(args[1])}"
        raise CommandError("usage: /config [list|get KEY|set KEY VALUE]")

    def _cmd_mcp(self, args: list[str]) -> str:
        try:
            if args and args[0] == "load" and len(args) > 2:
                handle = self.app.mcp.load_sse(args[2], args[1])
                return f"loaded {handle.name}: {len(handle.tools)} tools"
            if args and args[0] == "stdio" and len(args) > 2:
                handle = self.app.mcp.load_stdio(args[1], " ".join(args[2:]))
                return f"loaded {handle.name}: {len(handle.tools)} tools"
            if args and args[0] == "add" and len(args) > 2:
                count = self.app.mcp.add_to_agent(args[1], args[2])
                return f"Added {count} tools from server '{args[1]}' to agent '{args[2]}'"
            if not args or args[0] == "list":
                rows = self.app.mcp.list_servers()
                if not rows:
                    return "no servers loaded"
                return "\n".join(
                    f"{row['name']}  {row['transport']}  tools={row['tool_count']}  "
                    f"live={row['live']}" for row in rows
                )
        except McpError as exc:
            raise CommandError(str(exc)) from None
        raise CommandError(
            "usage: /mcp load URL NAME | /mcp stdio NAME COMMAND | "
            "/mcp add SERVER AGENT | /mcp list"
        )

    def _cmd_memory(self, args: list[str]) -> str:
        if args and args[0] == "add" and len(args) > 2:
            record_id = self.app.memory.add(args[1], " ".join(args[2:]))
            return f"stored {record_id}"
        if args and args[0] == "query" and len(args) > 1:
            return self.app.memory.query(" ".join(args[1:]))
        if not args or args[0] == "list":
            count = len(self.app.memory)
            return f"{count} record(s) in memory"
        raise CommandError("usage: /memory [list|add KIND TEXT|query TEXT]")

    def _cmd_history(self, args: list[str]) -> str:
        if self.session_state is None or not self.session_state.history:
            return "(empty history)"
        lines = []
        for message in self.session_state.messages_for_completion():
            prefix = message.role
            if message.tool_calls:
                calls = ", ".join(c.tool_name for c in message.tool_calls)
                lines.append(f"{prefix}: [calls: {calls}] {message.content}")
            else:
                lines.append(f"{prefix}: {message.content}")
        return "\n".join(lines)

    def _cmd_compact(self, args: list[str]) -> str:
        state = self._ensure_state()
        if not state.history:
            raise CommandError("nothing to compact")
        self.app.engine.compact_history(state, self.app.model_ref)
        return "history compacted"

    def _cmd_flush(self, args: list[str]) -> str:
        if self.session_state is not None:
            self.session_state.flush_history()
        return "history cleared"

    def _cmd_parallel(self, args: list[str]) -> str:
        if args and args[0] == "add" and len(args) > 1:
            if not self.app.agents.has(args[1]):
                raise CommandError(f"unknown agent {args[1]!r}")
            self.parallel_roster.append(args[1])
            return f"parallel roster: {', '.join(self.parallel_roster)}"
        if args and args[0] == "clear":
            self.parallel_roster.clear()
            return "parallel roster cleared"
        if args and args[0] == "preset" and len(args) > 1:
            try:
                pattern = load_preset(args[1], self.app.agents, self.app.model_ref)
            except PatternError as exc:
                raise CommandError(str(exc)) from None
            self.parallel_roster = list(pattern.agents)
            return f"parallel roster: {', '.join(self.parallel_roster)}"
        return (
            f"parallel roster: {', '.join(self.parallel_roster) or '(empty)'}"
        )

    def _cmd_shell(self, args: list[str]) -> str:
        if not args:
            raise CommandError("usage: /shell COMMAND")
        return self._run_shell(" ".join(args))

    def _cmd_virt(self, args: list[str]) -> str:
        # Delegates verbatim to the container runtime CLI; no orchestration.
        if not args:
            raise CommandError("usage: /virt ARGS...")
        try:
            proc = subprocess.run(
                ["docker", *args], capture_output=True, text=True, timeout=120
            )
        except FileNotFoundError:
            raise CommandError("container runtime not available") from None
        return proc.stdout + proc.stderr

    def _cmd_help(self, args: list[str]) -> str:
        verbose = not (args and args[0] == "quick")
        lines = []
        for verb in sorted(VERBS):
            if verbose:
                lines.append(f"/{verb:<10} {VERBS[verb]}")
            else:
                lines.append(f"/{verb}")
        lines.append("$ CMD       quick shell command")
        lines.append("Ctrl+C      interrupt run / exit at idle prompt")
        return "\n".join(lines)


class CommandHistory:
    """Arrow-navigable persisted command history, capped at 1000 entries."""

    def __init__(self, path: Path, limit: int = HISTORY_LIMIT):
        self.path = path
        self.limit = limit
        self.entries: list[str] = []
        if path.exists():
            self.entries = path.read_text().splitlines()[-limit:]

    def append(self, line: str) -> None:
        self.entries.append(line)
        self.entries = self.entries[-self.limit:]
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("\n".join(self.entries) + "\n")


def main(argv: list[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(prog="secagent")
    parser.add_argument("--dotenv", default=".env", help="path to .env file")
    parser.add_argument(
        "--export-trace", default=None, help="write the session trace here on exit"
    )
    options = parser.parse_args(argv)

    try:
        config = load_config(options.dotenv)
        app = App(config=config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    repl = Repl(app)
    history = CommandHistory(app.workspace / HISTORY_FILENAME)
    try:
        import readline

        for entry in history.entries:
            readline.add_history(entry)
    except ImportError:
        pass

    print("secagent — type /help for commands")
    print(repl.status_bar())
    while True:
        try:
            line = input("> ")
        except EOFError:
            break
        except KeyboardInterrupt:
            # Second Ctrl+C at the idle prompt exits cleanly.
            print()
            break
        if not line.strip():
            continue
        history.append(line)
        try:
            print(repl.handle_line(line))
        except CommandError as exc:
            print(str(exc))
        except KeyboardInterrupt:
            if repl.session_state is not None:
                repl.session_state.interrupt()
            print("\n[interrupted]")
        print(repl.status_bar())

    if options.export_trace and repl.session_state is not None:
        Path(options.export_trace).write_text(
            render_jsonl(app.tracer.events("session"))
        )
    return EXIT_CLEAN


if __name__ == "__main__":
    sys.exit(main())
