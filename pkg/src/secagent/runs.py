"""Run lifecycle shared by the REPL and the control API.

A RunManager owns background run threads, routes operator steering
(interrupt, injection, agent switch) to the right RunState, and houses
the approval broker that gates mutating tools in approval mode.
"""

from __future__ import annotations

import itertools
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Any

from .agents import AgentRegistry
from .engine import Engine, RunState, Turn
from .tracing import Tracer

APPROVAL_TIMEOUT_SECONDS = 120.0

_current_run_id = threading.local()


def current_run_id() -> str | None:
    return getattr(_current_run_id, "value", None)


@dataclass
class ApprovalRequest:
    request_id: str
    run_id: str
    tool_name: str
    arguments: dict[str, Any]
    status: str = "pending"  # pending | approved | denied | expired
    requested_at: float = field(default_factory=time.time)

    def to_dict(self) -> dict[str, Any]:
        return {
            "request_id": self.request_id,
            "run_id": self.run_id,
            "tool_name": self.tool_name,
            "arguments": self.arguments,
            "status": self.status,
            "requested_at": self.requested_at,
        }


class ApprovalBroker:
    """Blocks run threads on pending approvals; operators resolve them.

    The run loop is serial, so at most one request per run is pending.
    An unresolved request expires to deny after the configured timeout.
    """

    def __init__(self, timeout: float = APPROVAL_TIMEOUT_SECONDS,
                 tracer: Tracer | None = None):
        self.timeout = timeout
        self.enabled = False
        self.tracer = tracer
        self._condition = threading.Condition()
        self._requests: dict[str, ApprovalRequest] = {}
        self._counter = itertools.count(1)

    def policy_hook(self, descriptor, arguments) -> str:
        """ToolRegistry policy: gate mutating/interactive dispatches."""
        if not self.enabled:
            return "approve"
        run_id = current_run_id() or "unmanaged"
        with self._condition:
            request = ApprovalRequest(
                request_id=f"apr-{next(self._counter)}",
                run_id=run_id,
                tool_name=descriptor.name,
                arguments=dict(arguments),
            )
            self._requests[request.request_id] = request
            self._condition.notify_all()
            deadline = time.monotonic() + self.timeout
            while request.status == "pending":
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    request.status = "expired"
                    break
                self._condition.wait(min(remaining, 0.5))
        return "approve" if request.status == "approved" else "deny"

    def pending_for(self, run_id: str) -> ApprovalRequest | None:
        with self._condition:
            for request in self._requests.values():
                if request.run_id == run_id and request.status == "pending":
                    return request
        return None

    def get(self, request_id: str) -> ApprovalRequest | None:
        with self._condition:
            return self._requests.get(request_id)

    def resolve(self, request_id: str, decision: str) -> ApprovalRequest:
        if decision not in ("approve", "deny"):
            raise ValueError(f"decision must be approve or deny, got {decision!r}")
        with self._condition:
            request = self._requests.get(request_id)
            if request is None:
                raise KeyError(f"unknown approval request: {request_id}")
            if request.status != "pending":
                raise RuntimeError(f"request already {request.status}")
            request.status = "approved" if decision == "approve" else "denied"
            self._condition.notify_all()
        if self.tracer is not None:
            self.tracer.record(
                request.run_id, "operator",
                {"action": f"approval_{request.status}",
                 "tool": request.tool_name, "request_id": request_id},
            )
        return request


@dataclass
class RunHandle:
    run_id: str
    state: RunState
    status: str = "running"  # running | finished | error
    turn: Turn | None = None
    error: str | None = None
    thread: threading.Thread | None = None
    done: threading.Event = field(default_factory=threading.Event)

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "status": self.status,
            "agent": self.state.active_agent.name,
            "model": self.state.active_agent.model.model_name,
            "turn_count": self.state.turn_count,
            "interaction_count": self.state.interaction_count,
            "interrupted": self.state.interrupted,
            "end_reason": self.turn.end_reason if self.turn else None,
            "spend": self.state.meter.total_cost,
            "error": self.error,
        }


class RunManager:
    def __init__(self, engine: Engine, agents: AgentRegistry, tracer: Tracer,
                 broker: ApprovalBroker | None = None):
        self.engine = engine
        self.agents = agents
        self.tracer = tracer
        self.broker = broker or ApprovalBroker()
        self._runs: dict[str, RunHandle] = {}
        self._lock = threading.Lock()

    def start(
        self,
        agent_name: str,
        task: str,
        max_interactions: int = 10,
        run_id: str | None = None,
        state: RunState | None = None,
        background: bool = True,
    ) -> RunHandle:
        """Launch a turn for a task; reuses `state` to continue a session."""
        agent = self.agents.get(agent_name)
        run_id = run_id or f"run-{uuid.uuid4().hex[:8]}"
        if state is None:
            state = RunState(run_id=run_id, active_agent=agent)
        else:
            state.clear_interrupt()
            state.active_agent = agent
            run_id = state.run_id
        state.add_user_task(task)
        handle = RunHandle(run_id=run_id, state=state)
        with self._lock:
            self._runs[run_id] = handle

        def _body():
            _current_run_id.value = run_id
            try:
                handle.turn = self.engine.run_turn(state, max_interactions)
                handle.status = "finished"
            except Exception as exc:
                handle.status = "error"
                handle.error = f"{type(exc).__name__}: {exc}"
            finally:
                handle.done.set()

        if background:
            handle.thread = threading.Thread(target=_body, daemon=True)
            handle.thread.start()
        else:
            _body()
        return handle

    def get(self, run_id: str) -> RunHandle:
        with self._lock:
            if run_id not in self._runs:
                raise KeyError(f"unknown run: {run_id}")
            return self._runs[run_id]

    def list(self) -> list[RunHandle]:
        with self._lock:
            return list(self._runs.values())

    def interrupt(self, run_id: str) -> None:
        self.get(run_id).state.interrupt()

    def inject_message(self, run_id: str, text: str) -> None:
        self.get(run_id).state.inject_message(text)

    def switch_agent(self, run_id: str, agent_name: str) -> None:
        self.agents.get(agent_name)  # validate before queueing
        self.get(run_id).state.request_agent(agent_name)

    def wait(self, run_id: str, timeout: float | None = None) -> RunHandle:
        handle = self.get(run_id)
        handle.done.wait(timeout)
        return handle
