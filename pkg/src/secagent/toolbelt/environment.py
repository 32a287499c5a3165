"""Where tool commands actually run.

Resolution is a pure function of configuration with a fixed priority:
CTF target > active container > SSH target > local host.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass

from ..config import EnvConfig


@dataclass(frozen=True)
class ExecutionEnvironment:
    kind: str  # ctf | container | ssh | local
    address: str = ""
    username: str = ""
    container_runtime: str = "docker"

    def wrap(self, command: str) -> list[str]:
        """Argv that runs `command` inside this environment."""
        if self.kind in ("ctf", "container"):
            return [
                self.container_runtime,
                "exec",
                self.address,
                "sh",
                "-c",
                command,
            ]
        if self.kind == "ssh":
            target = f"{self.username}@{self.address}" if self.username else self.address
            return ["ssh", "-o", "BatchMode=yes", target, command]
        return ["sh", "-c", command]


def resolve_environment(
    config: EnvConfig, container_runtime: str = "docker"
) -> ExecutionEnvironment:
    """Apply the fixed priority order: ctf > container > ssh > local."""
    ctf_target = config.get("CTF_NAME") or config.get("CTF_IP")
    if ctf_target:
        return ExecutionEnvironment(
            kind="ctf", address=str(ctf_target), container_runtime=container_runtime
        )
    container = config.get("CAI_ACTIVE_CONTAINER")
    if container:
        return ExecutionEnvironment(
            kind="container", address=str(container), container_runtime=container_runtime
        )
    ssh_host = config.get("SSH_HOST")
    ssh_user = config.get("SSH_USER")
    if ssh_host and ssh_user:
        return ExecutionEnvironment(
            kind="ssh", address=str(ssh_host), username=str(ssh_user)
        )
    return ExecutionEnvironment(kind="local")


def quote(value: str) -> str:
    return shlex.quote(value)
