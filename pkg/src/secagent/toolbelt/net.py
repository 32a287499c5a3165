"""Networked capabilities: SSH with password auth, Shodan, web search."""

from __future__ import annotations

import os
import pty
import select
import subprocess
import time
from typing import Any, Callable

import httpx

from .registry import ToolError, ToolOutput, truncate_output

SSH_DEFAULT_PORT = 22
SSH_TIMEOUT_SECONDS = 20.0

SHODAN_DEFAULT_LIMIT = 10
SHODAN_API_BASE = "https://api.shodan.io"

SEARCH_DISABLED_NOTICE = "search disabled: no web search provider configured"


class AuthenticationError(ToolError):
    pass


class ConnectivityError(ToolError):
    pass


def run_ssh_command_with_credentials(
    host: str,
    username: str,
    password: str,
    command: str,
    port: int = SSH_DEFAULT_PORT,
    timeout: float = SSH_TIMEOUT_SECONDS,
    ssh_binary: str = "ssh",
) -> ToolOutput:
    """Execute a remote command over SSH using password authentication.

    The client process runs under a pty so the password prompt can be
    answered programmatically; auth failures are reported distinctly from
    connectivity failures.
    """
    argv = [
        ssh_binary,
        "-p",
        str(port),
        "-o",
        "StrictHostKeyChecking=no",
        "-o",
        f"ConnectTimeout={int(timeout)}",
        f"{username}@{host}",
        command,
    ]
    output, status = _drive_password_prompt(argv, password, timeout)
    lowered = output.lower()
    if "permission denied" in lowered or "authentication failed" in lowered:
        raise AuthenticationError(f"authentication failed for {username}@{host}")
    if status is None:
        raise ConnectivityError(f"timeout connecting to {host}:{port}")
    if status != 0 and ("connection refused" in lowered or "could not resolve" in lowered):
        raise ConnectivityError(f"cannot reach {host}:{port}: {output.strip()}")
    result = truncate_output(output)
    result.exit_status = status
    return result


def _drive_password_prompt(
    argv: list[str], password: str, timeout: float
) -> tuple[str, int | None]:
    """Run argv under a pty, answering the first password prompt."""
    leader_fd, follower_fd = pty.openpty()
    proc = subprocess.Popen(
        argv,
        stdin=follower_fd,
        stdout=follower_fd,
        stderr=follower_fd,
        close_fds=True,
    )
    os.close(follower_fd)
    collected = bytearray()
    answered = False
    deadline = time.monotonic() + timeout
    try:
        while time.monotonic() < deadline:
            ready, _, _ = select.select([leader_fd], [], [], 0.2)
            if ready:
                try:
                    chunk = os.read(leader_fd, 4096)
                except OSError:
                    break
                if not chunk:
                    break
                collected.extend(chunk)
                if not answered and b"password" in collected.lower():
                    os.write(leader_fd, password.encode() + b"\n")
                    answered = True
            elif proc.poll() is not None:
                break
        try:
            status = proc.wait(timeout=max(0.0, deadline - time.monotonic()))
        except subprocess.TimeoutExpired:
            proc.terminate()
            try:
                proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                proc.kill()
            status = None
    finally:
        os.close(leader_fd)
    text = collected.decode("utf-8", errors="replace")
    if answered:
        # Drop the echoed prompt/password line from the transcript.
        text = text.replace(password, "").replace("\r", "")
        lines = [line for line in text.split("\n") if "password" not in line.lower()]
        text = "\n".join(lines).lstrip("\n")
    return text, status


ShodanTransport = Callable[[str, dict[str, Any]], dict[str, Any]]


def _default_shodan_transport(url: str, params: dict[str, Any]) -> dict[str, Any]:
    response = httpx.get(url, params=params, timeout=30.0)
    response.raise_for_status()
    return response.json()


def shodan_query(
    mode: str,
    query_or_host: str,
    limit: int = SHODAN_DEFAULT_LIMIT,
    api_key: str | None = None,
    transport: ShodanTransport | None = None,
) -> dict[str, Any]:
    """Search Shodan or fetch one host record."""
    if not api_key:
        raise ToolError("shodan API key not configured (SHODAN_API_KEY)")
    if mode not in ("search", "host_info"):
        raise ToolError(f"unknown shodan mode: {mode}")
    transport = transport or _default_shodan_transport
    if mode == "search":
        data = transport(
            f"{SHODAN_API_BASE}/shodan/host/search",
            {"key": api_key, "query": query_or_host},
        )
        matches = data.get("matches", [])[:limit]
        return {"mode": "search", "total": data.get("total", len(matches)), "matches": matches}
    data = transport(
        f"{SHODAN_API_BASE}/shodan/host/{query_or_host}", {"key": api_key}
    )
    return {"mode": "host_info", "host": data}


SearchProvider = Callable[[str], list[dict[str, str]]]


def web_search(
    query: str, provider: SearchProvider | None = None
) -> list[dict[str, str]] | str:
    """Search the web; each result carries url, title, and snippet."""
    if not query.strip():
        raise ToolError("empty search query")
    if provider is None:
        return SEARCH_DISABLED_NOTICE
    results = provider(query)
    return [
        {"url": r["url"], "title": r["title"], "snippet": r["snippet"]} for r in results
    ]
