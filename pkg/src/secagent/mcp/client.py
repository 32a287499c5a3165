"""Tool-server protocol client over STDIO and SSE transports.

Discovered remote tools wrap into ToolDescriptors whose invocation
proxies across the transport, so agents can call them like local tools.
"""

from __future__ import annotations

import itertools
import json
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Any

import httpx

from ..agents import AgentRegistry
from ..toolbelt import ToolDescriptor, ToolOutput, ToolParam, ToolRegistry

CLIENT_PROTOCOL_VERSION = "2025-06-18"
DEFAULT_CALL_TIMEOUT_SECONDS = 30.0


class McpError(Exception):
    pass


class _StdioTransport:
    """Newline-delimited JSON-RPC over a child process's stdio.

    A single duplex stream: concurrent requests are serialized.
    """

    def __init__(self, command: str, args: list[str]):
        try:
            self._proc = subprocess.Popen(
                [command, *args],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
            )
        except OSError as exc:
            raise McpError(f"cannot start server process: {exc}") from None
        self._lock = threading.Lock()
        self._ids = itertools.count(1)

    @property
    def live(self) -> bool:
        return self._proc.poll() is None

    def request(self, method: str, params: dict | None = None,
                timeout: float = DEFAULT_CALL_TIMEOUT_SECONDS) -> Any:
        if not self.live:
            raise McpError("server process has exited")
        request_id = next(self._ids)
        message = {"jsonrpc": "2.0", "id": request_id, "method": method}
        if params is not None:
            message["params"] = params
        with self._lock:
            self._proc.stdin.write(json.dumps(message) + "\n")
            self._proc.stdin.flush()
            response = self._read_response(request_id, timeout)
        if "error" in response:
            raise McpError(response["error"].get("message", "remote error"))
        return response.get("result")

    def _read_response(self, request_id: int, timeout: float) -> dict:
        result: dict = {}

        def _reader():
            while True:
                line = self._proc.stdout.readline()
                if not line:
                    break
                try:
                    data = json.loads(line)
                except json.JSONDecodeError:
                    continue
                if data.get("id") == request_id:
                    result.update(data)
                    break

        thread = threading.Thread(target=_reader, daemon=True)
        thread.start()
        thread.join(timeout)
        if not result:
            raise McpError(f"timeout waiting for response to request {request_id}")
        return result

    def notify(self, method: str) -> None:
        with self._lock:
            self._proc.stdin.write(
                json.dumps({"jsonrpc": "2.0", "method": method}) + "\n"
            )
            self._proc.stdin.flush()

    def close(self) -> None:
        if self.live:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()


class _SseTransport:
    """JSON-RPC over an HTTP event stream plus message POSTs.

    The server's stream announces the message endpoint in an `endpoint`
    event; responses come back as `message` events.
    """

    def __init__(self, url: str, timeout: float = 10.0):
        self._client = httpx.Client(timeout=timeout)
        self._ids = itertools.count(1)
        self._responses: dict[int, dict] = {}
        self._response_ready = threading.Condition()
        self._endpoint: str | None = None
        self._closed = False
        endpoint_ready = threading.Event()

        def _stream():
            try:
                with self._client.stream("GET", url) as response:
                    response.raise_for_status()
                    event = None
                    for line in response.iter_lines():
                        if self._closed:
                            break
                        if line.startswith("event:"):
                            event = line.split(":", 1)[1].strip()
                        elif line.startswith("data:"):
                            data = line.split(":", 1)[1].strip()
                            if event == "endpoint":
                                self._endpoint = str(httpx.URL(url).join(data))
                                endpoint_ready.set()
                            elif event == "message":
                                payload = json.loads(data)
                                with self._response_ready:
                                    if "id" in payload:
                                        self._responses[payload["id"]] = payload
                                        self._response_ready.notify_all()
            except httpx.HTTPError:
                endpoint_ready.set()

        self._thread = threading.Thread(target=_stream, daemon=True)
        self._thread.start()
        if not endpoint_ready.wait(timeout) or self._endpoint is None:
            self.close()
            raise McpError(f"cannot establish event stream at {url}")

    @property
    def live(self) -> bool:
        return not self._closed and self._thread.is_alive()

    def request(self, method: str, params: dict | None = None,
                timeout: float = DEFAULT_CALL_TIMEOUT_SECONDS) -> Any:
        request_id = next(self._ids)
        message = {"jsonrpc": "2.0", "id": request_id, "method": method}
        if params is not None:
            message["params"] = params
        self._client.post(self._endpoint, json=message)
        deadline = timeout
        with self._response_ready:
            if request_id not in self._responses:
                self._response_ready.wait(deadline)
            response = self._responses.pop(request_id, None)
        if response is None:
            raise McpError(f"timeout waiting for response to request {request_id}")
        if "error" in response:
            raise McpError(response["error"].get("message", "remote error"))
        return response.get("result")

    def notify(self, method: str) -> None:
        self._client.post(self._endpoint, json={"jsonrpc": "2.0", "method": method})

    def close(self) -> None:
        self._closed = True
        self._client.close()


@dataclass
class McpServerHandle:
    name: str
    transport_kind: str  # sse | stdio
    transport: Any
    tools: list[dict] = field(default_factory=list)
    negotiated_version: str | None = None
    call_timeout: float = DEFAULT_CALL_TIMEOUT_SECONDS

    @property
    def live(self) -> bool:
        return self.transport.live

    def call_tool(self, name: str, arguments: dict) -> str:
        result = self.transport.request(
            "tools/call",
            {"name": name, "arguments": arguments},
            timeout=self.call_timeout,
        )
        parts = [
            item.get("text", "")
            for item in result.get("content", [])
            if item.get("type") == "text"
        ]
        return "\n".join(parts)


class McpManager:
    """Loads servers, lists them, and attaches their tools to agents."""

    def __init__(self, tool_registry: ToolRegistry, agent_registry: AgentRegistry):
        self.tool_registry = tool_registry
        self.agent_registry = agent_registry
        self._servers: dict[str, McpServerHandle] = {}
        self._added: set[tuple[str, str]] = set()

    def load_stdio(self, name: str, command_line: str,
                   call_timeout: float = DEFAULT_CALL_TIMEOUT_SECONDS) -> McpServerHandle:
        parts = shlex.split(command_line)
        return self._load(name, "stdio", _StdioTransport(parts[0], parts[1:]), call_timeout)

    def load_sse(self, name: str, url: str,
                 call_timeout: float = DEFAULT_CALL_TIMEOUT_SECONDS) -> McpServerHandle:
        try:
            transport = _SseTransport(url)
        except httpx.HTTPError as exc:
            raise McpError(f"cannot connect to {url}: {exc}") from None
        return self._load(name, "sse", transport, call_timeout)

    def _load(self, name: str, kind: str, transport, call_timeout: float) -> McpServerHandle:
        if name in self._servers:
            transport.close()
            raise McpError(f"server name already in use: {name}")
        try:
            init = transport.request(
                "initialize",
                {
                    "protocolVersion": CLIENT_PROTOCOL_VERSION,
                    "capabilities": {},
                    "clientInfo": {"name": "secagent", "version": "0.1.0"},
                },
                timeout=10.0,
            )
            transport.notify("notifications/initialized")
            listing = transport.request("tools/list", timeout=10.0)
        except McpError:
            transport.close()
            raise
        handle = McpServerHandle(
            name=name,
            transport_kind=kind,
            transport=transport,
            tools=listing.get("tools", []),
            negotiated_version=(init or {}).get("protocolVersion"),
            call_timeout=call_timeout,
        )
        self._servers[name] = handle
        return handle

    def get(self, name: str) -> McpServerHandle:
        if name not in self._servers:
            raise McpError(f"no loaded server named {name!r}")
        return self._servers[name]

    def add_to_agent(self, server_name: str, agent_name: str) -> int:
        """Register each remote tool as a proxying descriptor on the agent.

        Name collisions with existing tools register as "tool@server".
        Re-adding the same server to the same agent is a no-op.
        """
        handle = self.get(server_name)
        if not handle.live:
            raise McpError(f"server {server_name!r} is not live")
        agent = self.agent_registry.get(agent_name)
        if (server_name, agent_name) in self._added:
            return 0
        count = 0
        for tool in handle.tools:
            remote_name = tool["name"]
            local_name = remote_name
            if self.tool_registry.has(local_name):
                local_name = f"{remote_name}@{server_name}"
            if not self.tool_registry.has(local_name):
                self.tool_registry.register(
                    _wrap_descriptor(local_name, tool, server_name),
                    _make_proxy(handle, remote_name),
                )
            if local_name not in agent.tools:
                agent.tools.append(local_name)
            count += 1
        self._added.add((server_name, agent_name))
        return count

    def list_servers(self) -> list[dict]:
        return [
            {
                "name": handle.name,
                "transport": handle.transport_kind,
                "tool_count": len(handle.tools),
                "live": handle.live,
            }
            for handle in self._servers.values()
        ]

    def close_all(self) -> None:
        for handle in self._servers.values():
            handle.transport.close()


def _wrap_descriptor(local_name: str, tool: dict, server_name: str) -> ToolDescriptor:
    schema = tool.get("inputSchema", {})
    required = set(schema.get("required", []))
    params = {
        param: ToolParam(
            semantic_type=prop.get("type", "string"),
            required=param in required,
            description=prop.get("description", ""),
        )
        for param, prop in schema.get("properties", {}).items()
    }
    return ToolDescriptor(
        name=local_name,
        description=f"[{server_name}] {tool.get('description', '')}",
        parameter_schema=params,
        category="other",
        # Remote effects are unknown; treat as mutating so approval gating
        # covers proxied calls.
        effect_class="mutating",
    )


def _make_proxy(handle: McpServerHandle, remote_name: str):
    def _proxy(**arguments) -> ToolOutput:
        try:
            text = handle.call_tool(remote_name, arguments)
        except McpError as exc:
            return ToolOutput(text=f"error: remote call failed: {exc}", exit_status=1)
        return ToolOutput(text=text, exit_status=0)

    return _proxy
