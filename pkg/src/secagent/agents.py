"""Agent definitions and the built-in roster.

An agent is a named configuration: instructions, model, tools, and
handoff targets. The roster ships as data so presets and the REPL's
numbered selection work without touching code.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .gateway import ModelRef
from .toolbelt import ToolRegistry

HANDOFF_PREFIX = "transfer_to_"


def handoff_tool_name(target_agent: str) -> str:
    return f"{HANDOFF_PREFIX}{target_agent}"


def handoff_target(tool_name: str) -> str | None:
    if tool_name.startswith(HANDOFF_PREFIX):
        return tool_name[len(HANDOFF_PREFIX):]
    return None


@dataclass
class AgentDef:
    name: str
    instructions: str
    model: ModelRef
    tools: list[str] = field(default_factory=list)
    handoffs: list[str] = field(default_factory=list)
    pattern_tag: str | None = None
    # Communication policy used when this agent hands off: shared keeps the
    # full history, fresh restarts from the task.
    handoff_context: str = "shared"

    def with_model(self, model: ModelRef) -> "AgentDef":
        return replace(self, model=model)


class AgentRegistry:
    """Named agent catalog; names are unique, references must resolve."""

    def __init__(self, tool_registry: ToolRegistry):
        self.tool_registry = tool_registry
        self._agents: dict[str, AgentDef] = {}

    def register(self, agent: AgentDef, defer_validation: bool = False) -> None:
        if agent.name in self._agents:
            raise ValueError(f"duplicate agent name: {agent.name}")
        self._agents[agent.name] = agent
        if not defer_validation:
            try:
                self._validate(agent)
            except Exception:
                del self._agents[agent.name]
                raise

    def register_all(self, agents: list[AgentDef]) -> None:
        """Register a mutually-referencing group, then validate together."""
        for agent in agents:
            self.register(agent, defer_validation=True)
        try:
            for agent in agents:
                self._validate(agent)
        except Exception:
            for agent in agents:
                self._agents.pop(agent.name, None)
            raise

    def _validate(self, agent: AgentDef) -> None:
        for tool in agent.tools:
            if not self.tool_registry.has(tool):
                raise ValueError(f"agent {agent.name}: unknown tool {tool!r}")
        for target in agent.handoffs:
            if target not in self._agents:
                raise ValueError(
                    f"agent {agent.name}: handoff to unregistered agent {target!r}"
                )

    def has(self, name: str) -> bool:
        return name in self._agents

    def get(self, name: str) -> AgentDef:
        if name not in self._agents:
            raise KeyError(
                f"unknown agent {name!r}; available: {', '.join(sorted(self._agents))}"
            )
        return self._agents[name]

    def names(self) -> list[str]:
        return list(self._agents)

    def add_handoff(self, source: str, target: str) -> str:
        """Wire source -> target; returns the synthesized handoff tool name."""
        agent = self.get(source)
        self.get(target)
        if target not in agent.handoffs:
            agent.handoffs.append(target)
        return handoff_tool_name(target)


# Built-in roster, numbered for "/agent N" selection. Instructions are
# deliberately short; operators tune them per engagement.
ROSTER: list[tuple[int, str, str, list[str]]] = [
    (1, "blueteam_agent",
     "You are a blue team defender. Monitor, detect, and respond to "
     "suspicious activity; harden systems and report findings.",
     ["generic_linux_command", "cat_file", "list_dir", "netstat", "think"]),
    (2, "bug_bounter_agent",
     "You are a bug bounty hunter specialized in web security, API testing "
     "and responsible disclosure.",
     ["generic_linux_command", "curl", "web_search", "execute_code", "think"]),
    (3, "dfir_agent",
     "You are a digital forensics and incident response specialist: "
     "evidence preservation, timeline reconstruction, threat hunting.",
     ["generic_linux_command", "strings_extract", "cat_file", "find_file", "think"]),
    (4, "flag_discriminator",
     "You extract the CTF flag from tool output. Reply with the flag only.",
     ["think"]),
    (5, "one_tool_agent",
     "You are a CTF conqueror and command line expert. Solve the challenge "
     "using generic linux commands.",
     ["generic_linux_command"]),
    (6, "dns_smtp_agent",
     "You audit email and DNS configuration security (SPF, DKIM, DMARC).",
     ["generic_linux_command", "curl", "think"]),
    (7, "memory_analysis_agent",
     "You analyze process memory and runtime behavior for security "
     "assessment.",
     ["generic_linux_command", "strings_extract", "think"]),
    (8, "network_security_analyzer",
     "You monitor, capture and analyze network communications for threats.",
     ["generic_linux_command", "netstat", "netcat", "nmap", "think"]),
    (9, "redteam_agent",
     "You are a red team operator: vulnerability discovery, exploitation "
     "paths, and impact demonstration within scope.",
     ["generic_linux_command", "nmap", "curl", "execute_code", "decode64",
      "decode_hex_bytes", "think"]),
    (10, "replay_attack_agent",
     "You test protocol implementations for replay vulnerabilities.",
     ["generic_linux_command", "netcat", "think"]),
    (11, "reporting_agent",
     "You write professional security assessment reports from run history.",
     ["think"]),
    (12, "retester_agent",
     "You verify reported vulnerabilities, determine exploitability, and "
     "eliminate false positives.",
     ["generic_linux_command", "curl", "execute_code", "think"]),
    (13, "reverse_engineering_agent",
     "You analyze binaries: disassembly, decompilation, and firmware.",
     ["generic_linux_command", "strings_extract", "decode64",
      "decode_hex_bytes", "think"]),
    (14, "subghz_sdr_agent",
     "You analyze sub-GHz radio signals (preset definition only).",
     ["think"]),
    (15, "thought_agent",
     "You reason about the current assessment and plan next steps.",
     ["think"]),
    (16, "use_case_agent",
     "You write case studies of security scenarios (preset definition only).",
     ["think"]),
    (17, "wifi_security_agent",
     "You test wireless network security (preset definition only).",
     ["think"]),
]


def roster_names() -> list[str]:
    return [name for _, name, _, _ in ROSTER]


def resolve_roster_selector(selector: str) -> str | None:
    """Map "/agent 13"-style numeric selection or a name to a roster name."""
    if selector.isdigit():
        for number, name, _, _ in ROSTER:
            if number == int(selector):
                return name
        return None
    return selector if selector in roster_names() else None


def build_roster(model: ModelRef) -> list[AgentDef]:
    """Instantiate every roster agent against one model reference."""
    return [
        AgentDef(name=name, instructions=instructions, model=model, tools=list(tools))
        for _, name, instructions, tools in ROSTER
    ]
