"""Shared fixtures: offline harness built around the scripted model."""

from __future__ import annotations

import itertools

import pytest

from secagent.agents import AgentDef, AgentRegistry
from secagent.config import load_config
from secagent.engine import Engine, RunState
from secagent.gateway import (
    ModelGateway,
    PricingTable,
    ScriptEntry,
    ToolCallRequest,
)
from secagent.toolbelt import build_default_registry
from secagent.tracing import Tracer

_call_ids = itertools.count(1)


def tool_call(name: str, **arguments) -> ToolCallRequest:
    return ToolCallRequest(id=f"call-{next(_call_ids)}", tool_name=name, arguments=arguments)


def stop(text: str = "done", prompt_tokens: int = 0, completion_tokens: int = 0) -> ScriptEntry:
    return ScriptEntry(
        content=text, prompt_tokens=prompt_tokens, completion_tokens=completion_tokens
    )


def calls(*requests: ToolCallRequest, prompt_tokens: int = 0,
          completion_tokens: int = 0) -> ScriptEntry:
    return ScriptEntry(
        tool_calls=list(requests),
        prompt_tokens=prompt_tokens,
        completion_tokens=completion_tokens,
    )


class Harness:
    """A fully-wired offline engine: scripted models, real toolbelt."""

    def __init__(self, workspace, tracer_enabled=True, price_limit=None, policy=None,
                 environ=None):
        env = {"CAI_WORKSPACE_DIR": str(workspace)}
        if environ:
            env.update(environ)
        self.workspace = workspace
        self.config = load_config(environ=env)
        self.tracer = Tracer(enabled=tracer_enabled)
        self.gateway = ModelGateway(pricing=PricingTable())
        self.tools = build_default_registry(
            self.config, workspace=workspace, policy=policy
        )
        self.agents = AgentRegistry(self.tools)
        self.engine = Engine(
            self.gateway, self.tools, self.agents,
            tracer=self.tracer, price_limit=price_limit,
        )

    def agent(self, name, script, tools=(), handoffs=(), model_name=None,
              instructions="You are a test agent.", handoff_context="shared") -> AgentDef:
        model = self.gateway.make_scripted_model(script, name=model_name)
        agent = AgentDef(
            name=name,
            instructions=instructions,
            model=model,
            tools=list(tools),
            handoffs=list(handoffs),
            handoff_context=handoff_context,
        )
        self.agents.register(agent, defer_validation=True)
        return agent

    def state(self, agent: AgentDef, task="start the assessment",
              run_id="run-under-test") -> RunState:
        state = RunState(run_id=run_id, active_agent=agent)
        state.add_user_task(task)
        return state


@pytest.fixture
def harness(tmp_path) -> Harness:
    return Harness(tmp_path)
