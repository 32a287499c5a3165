"""The toolbelt: callable capabilities organized by the kill-chain taxonomy.

`build_default_registry` wires every built-in tool against a resolved
execution environment and workspace. Deliberately-excluded offensive
capabilities keep stub descriptors that always refuse.
"""

from __future__ import annotations

import functools
from pathlib import Path
from typing import Any, Callable

from ..config import EnvConfig
from .code import execute_code
from .codec import decode64, decode_hex_bytes, strings_extract
from .environment import ExecutionEnvironment, resolve_environment
from .net import run_ssh_command_with_credentials, shodan_query, web_search
from .registry import (
    DENIED_OUTPUT,
    PolicyHook,
    ToolDescriptor,
    ToolError,
    ToolOutput,
    ToolParam,
    ToolRegistry,
    truncate_output,
)
from .sessions import Session, SessionManager
from .shell import WRAPPED_TOOLS, ShellExecutor, wrapped_command

__all__ = [
    "DENIED_OUTPUT",
    "ExecutionEnvironment",
    "PolicyHook",
    "Session",
    "SessionManager",
    "ShellExecutor",
    "ToolDescriptor",
    "ToolError",
    "ToolOutput",
    "ToolParam",
    "ToolRegistry",
    "build_default_registry",
    "decode64",
    "decode_hex_bytes",
    "execute_code",
    "resolve_environment",
    "run_ssh_command_with_credentials",
    "shodan_query",
    "strings_extract",
    "truncate_output",
    "web_search",
    "workspace_root",
]

THINK_ACK = "noted"

# Real offensive network capture / shell planting is out of scope; the
# descriptors remain visible so presets referencing them stay loadable.
STUB_TOOLS = ("reverse_shell_client", "webshell_suite", "capture_remote_traffic")
STUB_NOTICE = "not implemented in this distribution"


def workspace_root(config: EnvConfig) -> Path:
    """Resolve the workspace directory from CAI_WORKSPACE(_DIR)."""
    base = config.get("CAI_WORKSPACE_DIR") or "."
    name = config.get("CAI_WORKSPACE")
    root = Path(base)
    if name:
        root = root / str(name)
    return root


def build_default_registry(
    config: EnvConfig,
    workspace: Path | None = None,
    executor: ShellExecutor | None = None,
    policy: PolicyHook | None = None,
    think_recorder: Callable[[str], None] | None = None,
    search_provider=None,
    shodan_transport=None,
    ssh_binary: str = "ssh",
    container_runtime: str = "docker",
) -> ToolRegistry:
    workspace = workspace or workspace_root(config)
    if executor is None:
        executor = ShellExecutor(resolve_environment(config, container_runtime))
    registry = ToolRegistry(policy=policy)

    registry.register(
        ToolDescriptor(
            name="generic_linux_command",
            description=(
                "Run a Linux command in the active execution environment. "
                "Interactive programs keep a persistent session; pass the "
                "returned session id to continue one."
            ),
            parameter_schema={
                "command": ToolParam(description="command line to run"),
                "session_hint": ToolParam(
                    required=False, description="existing session id to reuse"
                ),
            },
            category="misc",
            effect_class="interactive",
        ),
        lambda command, session_hint=None: executor.run(
            command,
            session_hint=session_hint,
            cwd=str(workspace),
            extra_env=dict(config.extra) or None,
        ),
    )

    registry.register(
        ToolDescriptor(
            name="execute_code",
            description=(
                "Write a source file into the workspace and execute it; the "
                "file persists for later runs."
            ),
            parameter_schema={
                "code": ToolParam(description="source code to run"),
                "language": ToolParam(
                    required=False, default="py", description="language tag, e.g. py"
                ),
                "filename": ToolParam(
                    required=False, default="exploit", description="base filename"
                ),
                "timeout": ToolParam(
                    "seconds", required=False, default=100, description="wall limit"
                ),
            },
            category="exploitation",
            effect_class="mutating",
        ),
        lambda code, language="py", filename="exploit", timeout=100: execute_code(
            code, language, filename, float(timeout), workspace
        ),
    )

    registry.register(
        ToolDescriptor(
            name="run_ssh_command_with_credentials",
            description="Execute a remote command over SSH with password auth.",
            parameter_schema={
                "host": ToolParam(description="remote host address"),
                "username": ToolParam(description="SSH username"),
                "password": ToolParam(description="SSH password"),
                "command": ToolParam(description="command to run remotely"),
                "port": ToolParam("integer", required=False, default=22),
            },
            category="control",
            effect_class="interactive",
        ),
        lambda host, username, password, command, port=22: run_ssh_command_with_credentials(
            host, username, password, command, int(port), ssh_binary=ssh_binary
        ),
    )

    registry.register(
        ToolDescriptor(
            name="decode64",
            description="Decode Base64 input to text.",
            parameter_schema={"input": ToolParam(description="base64 text")},
            category="exploitation",
        ),
        lambda input: decode64(input),
    )
    registry.register(
        ToolDescriptor(
            name="decode_hex_bytes",
            description="Decode whitespace-separated 0xHH bytes to text.",
            parameter_schema={"input": ToolParam(description="e.g. '0x48 0x69'")},
            category="exploitation",
        ),
        lambda input: decode_hex_bytes(input),
    )
    registry.register(
        ToolDescriptor(
            name="strings_extract",
            description="Extract printable strings from a binary file.",
            parameter_schema={
                "path": ToolParam(description="file to scan"),
                "min_length": ToolParam("count", required=False, default=4),
            },
            category="exploitation",
        ),
        lambda path, min_length=4: "\n".join(strings_extract(path, int(min_length))),
    )

    _WRAPPED_META = {
        "curl": ("web", "Fetch a URL with curl."),
        "wget": ("web", "Fetch a URL with wget."),
        "nmap": ("reconnaissance", "Scan a target with nmap."),
        "netcat": ("network", "Probe a target port with netcat."),
        "netstat": ("network", "List listening sockets."),
        "list_dir": ("misc", "List a directory."),
        "cat_file": ("misc", "Print a file's contents."),
        "pwd_command": ("misc", "Print the working directory."),
        "find_file": ("misc", "Find files by name."),
    }
    _WRAPPED_PARAMS = {
        "curl": {"url": ToolParam()},
        "wget": {"url": ToolParam()},
        "nmap": {"target": ToolParam(), "options": ToolParam(required=False, default="-F")},
        "netcat": {"target": ToolParam(), "port": ToolParam("integer", required=False, default="")},
        "netstat": {},
        "list_dir": {"path": ToolParam(required=False, default=".")},
        "cat_file": {"path": ToolParam()},
        "pwd_command": {},
        "find_file": {"name": ToolParam(), "path": ToolParam(required=False, default=".")},
    }
    for name in WRAPPED_TOOLS:
        category, description = _WRAPPED_META[name]
        registry.register(
            ToolDescriptor(
                name=name,
                description=description,
                parameter_schema=_WRAPPED_PARAMS[name],
                category=category,
            ),
            functools.partial(_run_wrapped, name, executor, str(workspace)),
        )

    registry.register(
        ToolDescriptor(
            name="shodan_search",
            description="Search Shodan for hosts matching a query.",
            parameter_schema={
                "query": ToolParam(description="Shodan search query"),
                "limit": ToolParam("count", required=False, default=10),
            },
            category="reconnaissance",
        ),
        lambda query, limit=10: shodan_query(
            "search",
            query,
            int(limit),
            api_key=config.get("SHODAN_API_KEY"),
            transport=shodan_transport,
        ),
    )
    registry.register(
        ToolDescriptor(
            name="shodan_host_info",
            description="Fetch Shodan's record for one host.",
            parameter_schema={"host": ToolParam(description="IP address")},
            category="reconnaissance",
        ),
        lambda host: shodan_query(
            "host_info",
            host,
            api_key=config.get("SHODAN_API_KEY"),
            transport=shodan_transport,
        ),
    )

    registry.register(
        ToolDescriptor(
            name="web_search",
            description="Search the web; results carry url, title, snippet.",
            parameter_schema={"query": ToolParam(description="search query")},
            category="web",
        ),
        lambda query: web_search(query, provider=search_provider),
    )

    def _think(thought: str) -> str:
        if think_recorder is not None:
            think_recorder(thought)
        return THINK_ACK

    registry.register(
        ToolDescriptor(
            name="think",
            description=(
                "Record a reasoning step. Cannot obtain new information or "
                "change any state."
            ),
            parameter_schema={"thought": ToolParam(description="the thought")},
            category="other",
        ),
        _think,
    )

    for name in STUB_TOOLS:
        registry.register(
            ToolDescriptor(
                name=name,
                description=f"{name} ({STUB_NOTICE})",
                parameter_schema={},
                category="exfiltration",
            ),
            functools.partial(_stub, name),
        )

    return registry


def _run_wrapped(name: str, executor: ShellExecutor, cwd: str, **args: Any) -> ToolOutput:
    return wrapped_command(name, args, executor, cwd=cwd)


def _stub(name: str) -> ToolOutput:
    return ToolOutput(text=f"{name}: {STUB_NOTICE}", exit_status=1)
