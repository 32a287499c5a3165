"""Security-oriented multi-agent orchestration framework.

Agents run a reason-act loop against a tool registry, hand work off to
each other through patterns, and stay under a human operator's control
via the REPL and the local steering API. A deterministic scripted model
makes every control-flow property testable offline.
"""

from .agents import AgentDef, AgentRegistry
from .app import App
from .config import EnvConfig, load_config
from .engine import Engine, Interaction, RunState, Turn
from .gateway import (
    ChatMessage,
    CompletionResult,
    ModelGateway,
    ModelRef,
    ScriptEntry,
    ToolCallRequest,
    UsageMeter,
    UsageSample,
)
from .memory import MemoryStore
from .patterns import Pattern, build_pattern, load_preset, run_pattern
from .toolbelt import ToolDescriptor, ToolOutput, ToolRegistry
from .tracing import TraceEvent, Tracer

__all__ = [
    "AgentDef",
    "AgentRegistry",
    "App",
    "ChatMessage",
    "CompletionResult",
    "Engine",
    "EnvConfig",
    "Interaction",
    "MemoryStore",
    "ModelGateway",
    "ModelRef",
    "Pattern",
    "RunState",
    "ScriptEntry",
    "ToolCallRequest",
    "ToolDescriptor",
    "ToolOutput",
    "ToolRegistry",
    "TraceEvent",
    "Tracer",
    "Turn",
    "UsageMeter",
    "UsageSample",
    "build_pattern",
    "load_config",
    "load_preset",
    "run_pattern",
]

__version__ = "0.1.0"
