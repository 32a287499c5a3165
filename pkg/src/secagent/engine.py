"""The ReAct execution engine.

One run owns one RunState. Each interaction is one model inference plus
its tool executions; a turn loops interactions until quiescence, a
handoff chain settles, a governor trips, or the operator interrupts.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

from .agents import AgentDef, AgentRegistry, handoff_target
from .gateway import (
    ChatMessage,
    CompletionResult,
    GatewayError,
    ModelGateway,
    ModelRef,
    ToolCallRequest,
    UsageMeter,
    check_price_limit,
)
from .toolbelt import ToolRegistry
from .tracing import Tracer

END_REASONS = {"quiescent", "max_turns", "price_limit", "operator_abort", "error"}

DEFAULT_MAX_INTERACTIONS = 10

_ARG_PREVIEW_LIMIT = 512
_TEXT_PREVIEW_LIMIT = 2048


class HandoffError(Exception):
    """Handoff to an unregistered agent: terminal for the run."""


@dataclass
class Interaction:
    index: int
    reasoning_message: ChatMessage
    tool_invocations: list[tuple[ToolCallRequest, "object"]]
    agent_name: str
    completion: CompletionResult
    handoff_applied: str | None = None


@dataclass
class Turn:
    interactions: list[Interaction]
    end_reason: str

    def __post_init__(self):
        if self.end_reason not in END_REASONS:
            raise ValueError(f"unknown end reason: {self.end_reason}")


class RunState:
    """Mutable state of one run. Owned by one loop; the interrupt flag and
    the mailbox are the only outside-writable parts."""

    def __init__(
        self,
        run_id: str,
        active_agent: AgentDef,
        meter: UsageMeter | None = None,
    ):
        self.run_id = run_id
        self.active_agent = active_agent
        self.history: list[ChatMessage] = []
        self.meter = meter or UsageMeter()
        self.turn_count = 0
        self.interaction_count = 0
        self._interrupted = threading.Event()
        self._mailbox_lock = threading.Lock()
        self._pending_messages: list[str] = []
        self._pending_agent: str | None = None

    @property
    def interrupted(self) -> bool:
        return self._interrupted.is_set()

    def interrupt(self) -> None:
        self._interrupted.set()

    def clear_interrupt(self) -> None:
        self._interrupted.clear()

    def inject_message(self, text: str) -> None:
        """Queue operator guidance; enters history before the next inference."""
        with self._mailbox_lock:
            self._pending_messages.append(text)

    def request_agent(self, name: str) -> None:
        """Queue an agent switch; applies at the next interaction boundary."""
        with self._mailbox_lock:
            self._pending_agent = name

    @property
    def has_pending_steering(self) -> bool:
        with self._mailbox_lock:
            return bool(self._pending_messages or self._pending_agent is not None)

    def drain_mailbox(self) -> tuple[list[str], str | None]:
        with self._mailbox_lock:
            messages, self._pending_messages = self._pending_messages, []
            agent, self._pending_agent = self._pending_agent, None
        return messages, agent

    def add_user_task(self, text: str) -> None:
        self.history.append(ChatMessage(role="user", content=text))

    def messages_for_completion(self) -> list[ChatMessage]:
        """Outbound view: the active agent's system message plus history."""
        messages: list[ChatMessage] = []
        if self.active_agent.instructions:
            messages.append(
                ChatMessage(role="system", content=self.active_agent.instructions)
            )
        messages.extend(self.history)
        return messages

    def flush_history(self) -> None:
        self.history.clear()


def _preview(text: str, limit: int = _TEXT_PREVIEW_LIMIT) -> str:
    return text if len(text) <= limit else text[:limit] + "…"


class Engine:
    """Runs interactions and turns; dispatches tools; applies handoffs."""

    def __init__(
        self,
        gateway: ModelGateway,
        tools: ToolRegistry,
        agents: AgentRegistry,
        tracer: Tracer | None = None,
        price_limit: float | None = None,
    ):
        self.gateway = gateway
        self.tools = tools
        self.agents = agents
        self.tracer = tracer or Tracer(enabled=False)
        self.price_limit = price_limit

    # -- interactions ----------------------------------------------------

    def run_interaction(self, state: RunState) -> Interaction:
        agent = state.active_agent
        messages, switch_to = state.drain_mailbox()
        for text in messages:
            state.add_user_task(text)
            self.tracer.record(
                state.run_id,
                "operator",
                {"action": "inject_message", "text": _preview(text)},
                turn=state.turn_count,
                interaction=state.interaction_count,
            )
        if switch_to is not None:
            agent = state.active_agent = self.agents.get(switch_to)
            self.tracer.record(
                state.run_id,
                "operator",
                {"action": "switch_agent", "agent": agent.name},
                turn=state.turn_count,
                interaction=state.interaction_count,
            )

        schemas = self.tools.wire_schemas(
            [t for t in agent.tools if self.tools.has(t)]
        ) + [_handoff_schema(name) for name in agent.handoffs]

        completion = self.gateway.complete(
            agent.model, state.messages_for_completion(), schemas, meter=state.meter
        )
        if self.gateway.pricing.lookup(agent.model.model_name) is None:
            self.tracer.record(
                state.run_id,
                "governor",
                {"warning": "unpriced_model", "model": agent.model.model_name},
                turn=state.turn_count,
                interaction=state.interaction_count,
            )
        state.interaction_count += 1
        index = state.interaction_count
        inference_id = self.tracer.record(
            state.run_id,
            "inference",
            {
                "agent": agent.name,
                "model": agent.model.model_name,
                "finish_kind": completion.finish_kind,
                "content": _preview(completion.message.content),
                "tool_calls": [c.tool_name for c in completion.message.tool_calls],
                "usage": {
                    "prompt_tokens": completion.usage.prompt_tokens,
                    "completion_tokens": completion.usage.completion_tokens,
                    "cost_estimate": completion.usage.cost_estimate,
                },
            },
            turn=state.turn_count,
            interaction=index,
        )
        state.history.append(completion.message)
        interaction = Interaction(
            index=index,
            reasoning_message=completion.message,
            tool_invocations=[],
            agent_name=agent.name,
            completion=completion,
        )

        # Ordinary tools run first, in list order; a co-occurring handoff
        # executes last so its target inherits the fresh results.
        handoff_call: ToolCallRequest | None = None
        for call in completion.message.tool_calls:
            if handoff_target(call.tool_name) in agent.handoffs:
                if handoff_call is None:
                    handoff_call = call
                else:
                    state.history.append(
                        ChatMessage(
                            role="tool",
                            content="ignored: a handoff was already requested",
                            tool_call_id=call.id,
                        )
                    )
                continue
            output = self._dispatch(state, call, parent_id=inference_id)
            interaction.tool_invocations.append((call, output))

        if handoff_call is not None:
            target_name = handoff_target(handoff_call.tool_name)
            state.history.append(
                ChatMessage(
                    role="tool",
                    content=f"transferring to {target_name}",
                    tool_call_id=handoff_call.id,
                )
            )
            if not self.agents.has(target_name):
                raise HandoffError(f"handoff to unregistered agent: {target_name}")
            target = self.agents.get(target_name)
            policy = agent.handoff_context
            self.apply_handoff(state, target, policy, parent_id=inference_id)
            interaction.handoff_applied = target_name

        return interaction

    def _dispatch(
        self, state: RunState, call: ToolCallRequest, parent_id: str | None
    ):
        from .toolbelt import ToolOutput

        if not self.tools.has(call.tool_name):
            output = ToolOutput(text=f"unknown tool: {call.tool_name}", exit_status=2)
        else:
            output = self.tools.dispatch(call.tool_name, call.arguments)
        state.history.append(
            ChatMessage(role="tool", content=output.text, tool_call_id=call.id)
        )
        self.tracer.record(
            state.run_id,
            "tool_call",
            {
                "tool": call.tool_name,
                "arguments": _preview(json.dumps(call.arguments), _ARG_PREVIEW_LIMIT),
                "output": _preview(output.text),
                "session_id": output.session_id,
                "exit_status": output.exit_status,
            },
            turn=state.turn_count,
            interaction=state.interaction_count,
            parent_id=parent_id,
        )
        return output

    # -- turns -----------------------------------------------------------

    def run_turn(
        self, state: RunState, max_interactions: int = DEFAULT_MAX_INTERACTIONS
    ) -> Turn:
        if max_interactions < 1:
            raise ValueError("max_interactions must be >= 1")
        state.turn_count += 1
        interactions: list[Interaction] = []
        end_reason = "max_turns"
        for _ in range(max_interactions):
            if state.interrupted:
                self.tracer.record(
                    state.run_id,
                    "interrupt",
                    {"at_interaction": state.interaction_count},
                    turn=state.turn_count,
                    interaction=state.interaction_count,
                )
                end_reason = "operator_abort"
                break
            try:
                interaction = self.run_interaction(state)
            except HandoffError as exc:
                self.tracer.record(
                    state.run_id,
                    "governor",
                    {"error": str(exc)},
                    turn=state.turn_count,
                    interaction=state.interaction_count,
                )
                end_reason = "error"
                break
            except GatewayError as exc:
                self.tracer.record(
                    state.run_id,
                    "governor",
                    {"error": f"model failure: {exc}"},
                    turn=state.turn_count,
                    interaction=state.interaction_count,
                )
                end_reason = "error"
                break
            interactions.append(interaction)
            if check_price_limit(state.meter, self.price_limit):
                self.tracer.record(
                    state.run_id,
                    "governor",
                    {
                        "breach": "price_limit",
                        "limit": self.price_limit,
                        "spend": state.meter.total_cost,
                    },
                    turn=state.turn_count,
                    interaction=state.interaction_count,
                )
                end_reason = "price_limit"
                break
            if (
                interaction.completion.finish_kind == "stop"
                and not interaction.completion.message.tool_calls
            ):
                end_reason = "quiescent"
                break
        else:
            self.tracer.record(
                state.run_id,
                "governor",
                {"breach": "max_turns", "limit": max_interactions},
                turn=state.turn_count,
                interaction=state.interaction_count,
            )
        return Turn(interactions=interactions, end_reason=end_reason)

    # -- handoffs --------------------------------------------------------

    def apply_handoff(
        self,
        state: RunState,
        target: AgentDef,
        context_policy: str = "shared",
        parent_id: str | None = None,
    ) -> RunState:
        if context_policy not in ("shared", "fresh"):
            raise ValueError(f"unknown context policy: {context_policy}")
        source = state.active_agent.name
        if context_policy == "fresh":
            last_task = next(
                (m for m in reversed(state.history) if m.role == "user"), None
            )
            state.history = [last_task] if last_task else []
        state.active_agent = target
        self.tracer.record(
            state.run_id,
            "handoff",
            {"from": source, "to": target.name, "policy": context_policy},
            turn=state.turn_count,
            interaction=state.interaction_count,
            parent_id=parent_id,
        )
        return state

    # -- history maintenance ---------------------------------------------

    def compact_history(self, state: RunState, summarizer: ModelRef) -> RunState:
        """Replace the conversation with a one-message model summary."""
        if not state.history:
            raise ValueError("nothing to compact: history is empty")
        prompt = [
            ChatMessage(
                role="system",
                content="Summarize the following conversation for continuation. "
                "Keep findings, credentials placeholders, and open tasks.",
            ),
            *state.history,
            ChatMessage(role="user", content="Summarize the conversation so far."),
        ]
        try:
            result = self.gateway.complete(summarizer, prompt, meter=state.meter)
        except GatewayError as exc:
            self.tracer.record(
                state.run_id,
                "operator",
                {"action": "compact_failed", "error": str(exc)},
                turn=state.turn_count,
                interaction=state.interaction_count,
            )
            return state
        state.history = [ChatMessage(role="assistant", content=result.message.content)]
        self.tracer.record(
            state.run_id,
            "operator",
            {"action": "compact", "summary": _preview(result.message.content)},
            turn=state.turn_count,
            interaction=state.interaction_count,
        )
        return state


def _handoff_schema(name: str) -> dict:
    return {
        "type": "function",
        "function": {
            "name": name,
            "description": f"Hand the task off to the {handoff_target(name)} agent.",
            "parameters": {"type": "object", "properties": {}, "required": []},
        },
    }
