"""Composition root: wires config, gateway, tools, agents, runs together."""

from __future__ import annotations

from pathlib import Path

from .agents import AgentRegistry, build_roster, resolve_roster_selector
from .config import ConfigSession, EnvConfig, load_config
from .engine import Engine
from .gateway import ModelGateway, ModelPricing, ModelRef, PricingTable
from .mcp import McpManager
from .memory import MemoryStore
from .runs import ApprovalBroker, RunManager, current_run_id
from .toolbelt import build_default_registry, workspace_root
from .tracing import Tracer

KNOWN_PROVIDERS = ("openai", "openrouter", "ollama", "anthropic", "scripted")

DEFAULT_PRICING = {
    # dollars per token
    "gpt-4o": (2.5e-06, 1e-05),
    "gpt-4o-mini": (1.5e-07, 6e-07),
}


def model_ref_from_name(name: str, config: EnvConfig) -> ModelRef:
    """Parse "provider/model" names into a ModelRef with routed base URL."""
    provider, _, model_name = name.partition("/")
    if provider not in KNOWN_PROVIDERS or not model_name:
        provider, model_name = "openai", name
    base_url = None
    api_key_ref = "OPENAI_API_KEY"
    if provider == "openrouter":
        base_url = config.get("OPENROUTER_API_BASE") or "https://openrouter.ai/api/v1"
        api_key_ref = "OPENROUTER_API_KEY"
        # OpenRouter routes by the full vendor/model path.
        model_name = name[len("openrouter/"):]
    elif provider == "ollama":
        base_url = config.get("OLLAMA_API_BASE") or "http://localhost:11434/v1"
    elif provider == "anthropic":
        api_key_ref = "ANTHROPIC_API_KEY"
    elif provider == "openai":
        base_url = config.get("OLLAMA_API_BASE") if config.get("OLLAMA") else None
    return ModelRef(
        provider_tag=provider,
        model_name=model_name,
        base_url=base_url,
        api_key_ref=api_key_ref,
    )


class App:
    """One operator session: configuration, registries, engine, runs."""

    def __init__(
        self,
        config: EnvConfig | None = None,
        dotenv_path: str | Path | None = ".env",
        pricing: PricingTable | None = None,
    ):
        self.config_session = ConfigSession(
            config if config is not None else load_config(dotenv_path)
        )
        config = self.config

        self.tracer = Tracer(enabled=bool(config.get("CAI_TRACING", True)))
        self.broker = ApprovalBroker(tracer=self.tracer)
        if pricing is None:
            pricing = PricingTable(
                {name: ModelPricing(p, c) for name, (p, c) in DEFAULT_PRICING.items()}
            )
        self.gateway = ModelGateway(
            pricing=pricing,
            api_keys={
                name: config.get(name)
                for name in ("OPENAI_API_KEY", "ANTHROPIC_API_KEY", "OPENROUTER_API_KEY")
                if config.get(name)
            },
        )
        self.workspace = workspace_root(config)
        self.tools = build_default_registry(
            config,
            workspace=self.workspace,
            policy=self.broker.policy_hook,
            think_recorder=self._record_thought,
        )
        self.agents = AgentRegistry(self.tools)
        self.model_ref = model_ref_from_name(
            str(config.get("CAI_MODEL", "openai/gpt-4o")), config
        )
        for agent in build_roster(self.model_ref):
            self.agents.register(agent, defer_validation=True)
        self.engine = Engine(
            self.gateway,
            self.tools,
            self.agents,
            tracer=self.tracer,
            price_limit=config.get("CAI_PRICE_LIMIT"),
        )
        self.runs = RunManager(self.engine, self.agents, self.tracer, self.broker)
        self.memory = MemoryStore(self.workspace / ".memory.jsonl")
        self.mcp = McpManager(self.tools, self.agents)

        agent_type = config.get("CAI_AGENT_TYPE")
        self.active_agent = (
            resolve_roster_selector(str(agent_type)) if agent_type else None
        ) or "one_tool_agent"
        self.max_interactions = int(config.get("CAI_MAX_TURNS") or 10)

    @property
    def config(self) -> EnvConfig:
        return self.config_session.snapshot

    def _record_thought(self, thought: str) -> None:
        self.tracer.record(
            current_run_id() or "adhoc", "memory", {"thought": thought}
        )

    def set_model(self, name: str) -> ModelRef:
        """Switch the session model; applies to every roster agent."""
        self.model_ref = model_ref_from_name(name, self.config)
        for agent_name in self.agents.names():
            self.agents.get(agent_name).model = self.model_ref
        return self.model_ref
