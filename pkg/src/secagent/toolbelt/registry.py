"""Tool registry core: descriptors, outputs, dispatch, and the policy hook."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Any, Callable

TRUNCATION_LIMIT_BYTES = 16 * 1024

CATEGORIES = {
    "reconnaissance",
    "exploitation",
    "exfiltration",
    "control",
    "network",
    "web",
    "misc",
    "other",
    "handoff",
}

EFFECT_CLASSES = {"read_only", "mutating", "interactive"}


class ToolError(Exception):
    """Tool-level failure returned to the model as an error observation."""


@dataclass
class ToolOutput:
    text: str
    truncated: bool = False
    session_id: str | None = None
    exit_status: int | None = None


def truncate_output(text: str, limit: int = TRUNCATION_LIMIT_BYTES) -> ToolOutput:
    data = text.encode("utf-8", errors="replace")
    if len(data) <= limit:
        return ToolOutput(text=text)
    kept = data[:limit].decode("utf-8", errors="replace")
    dropped = len(data) - limit
    return ToolOutput(text=f"{kept}…[truncated {dropped} bytes]", truncated=True)


@dataclass(frozen=True)
class ToolParam:
    semantic_type: str = "string"
    required: bool = True
    default: Any = None
    description: str = ""


@dataclass
class ToolDescriptor:
    name: str
    description: str
    parameter_schema: dict[str, ToolParam] = field(default_factory=dict)
    category: str = "misc"
    effect_class: str = "read_only"

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category: {self.category}")
        if self.effect_class not in EFFECT_CLASSES:
            raise ValueError(f"unknown effect_class: {self.effect_class}")

    def to_wire(self) -> dict[str, Any]:
        """OpenAI function-calling schema for this tool."""
        properties = {}
        required = []
        for name, param in self.parameter_schema.items():
            json_type = {
                "count": "integer",
                "integer": "integer",
                "number": "number",
                "seconds": "number",
                "boolean": "boolean",
            }.get(param.semantic_type, "string")
            properties[name] = {"type": json_type, "description": param.description}
            if param.required:
                required.append(name)
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": properties,
                    "required": required,
                },
            },
        }


# Policy hook: (descriptor, arguments) -> "approve" | "deny". Gates every
# mutating/interactive dispatch so HITL approval can veto execution.
PolicyHook = Callable[[ToolDescriptor, dict[str, Any]], str]

DENIED_OUTPUT = "denied by operator"


class ToolRegistry:
    """Named tool catalog; immutable after startup, shared across agents."""

    def __init__(self, policy: PolicyHook | None = None):
        self._tools: dict[str, tuple[ToolDescriptor, Callable[..., ToolOutput]]] = {}
        self.policy: PolicyHook | None = policy
        self._dispatch_lock = threading.Lock()

    def register(
        self, descriptor: ToolDescriptor, fn: Callable[..., ToolOutput]
    ) -> None:
        if descriptor.name in self._tools:
            raise ValueError(f"duplicate tool name: {descriptor.name}")
        self._tools[descriptor.name] = (descriptor, fn)

    def has(self, name: str) -> bool:
        return name in self._tools

    def get(self, name: str) -> ToolDescriptor:
        if name not in self._tools:
            raise KeyError(f"unknown tool: {name}")
        return self._tools[name][0]

    def names(self) -> list[str]:
        return sorted(self._tools)

    def descriptors(self, names: list[str] | None = None) -> list[ToolDescriptor]:
        if names is None:
            names = self.names()
        return [self.get(name) for name in names]

    def wire_schemas(self, names: list[str]) -> list[dict[str, Any]]:
        return [self.get(name).to_wire() for name in names]

    def dispatch(self, name: str, arguments: dict[str, Any]) -> ToolOutput:
        """Run a tool; failures become error-text outputs, never exceptions."""
        if name not in self._tools:
            raise KeyError(f"unknown tool: {name}")
        descriptor, fn = self._tools[name]

        resolved = dict(arguments)
        for param_name, param in descriptor.parameter_schema.items():
            if param_name not in resolved:
                if param.required:
                    return ToolOutput(
                        text=f"error: missing required argument '{param_name}'",
                        exit_status=2,
                    )
                resolved[param_name] = param.default

        if self.policy is not None and descriptor.effect_class in (
            "mutating",
            "interactive",
        ):
            decision = self.policy(descriptor, resolved)
            if decision != "approve":
                return ToolOutput(text=DENIED_OUTPUT, exit_status=1)

        try:
            result = fn(**resolved)
        except ToolError as exc:
            return ToolOutput(text=f"error: {exc}", exit_status=1)
        except Exception as exc:  # tool bugs must not kill the run loop
            return ToolOutput(text=f"error: {type(exc).__name__}: {exc}", exit_status=1)
        if isinstance(result, ToolOutput):
            return result
        if isinstance(result, str):
            return truncate_output(result)
        return truncate_output(json.dumps(result, indent=2, default=str))
