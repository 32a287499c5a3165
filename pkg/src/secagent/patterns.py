"""Multi-agent interaction patterns.

A pattern is the tuple (agents, handoff graph, decision rule,
communication policy, execution model). Building one synthesizes the
handoff tools onto each source agent; running one either drives a single
run through handoffs (sequential kinds) or launches one run per member
(parallel kind) under a shared or split context.
"""

from __future__ import annotations

import threading
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .agents import AgentDef, AgentRegistry, handoff_tool_name
from .engine import Engine, RunState, Turn

PATTERN_KINDS = {"swarm", "hierarchical", "chain", "auction", "recursive", "parallel"}

PRESET_NAMES = (
    "bb_triage_swarm",
    "redteam_swarm",
    "offsec_parallel",
    "red_blue_shared",
    "red_blue_split",
)


class PatternError(ValueError):
    pass


@dataclass
class Pattern:
    kind: str
    agents: dict[str, AgentDef]
    edges: list[tuple[str, str]]
    entry: str
    # Per-edge message-transfer policy; edges absent from the map are shared.
    communication: dict[tuple[str, str], str] = field(default_factory=dict)
    # Parallel context: shared aliases one history, split isolates copies.
    context: str = "shared"
    # Decision rule: maps run state to the next active agent. Required for
    # auction patterns; elsewhere the model's own handoff choices decide.
    decision: Callable[[RunState], str] | None = None

    @property
    def execution(self) -> str:
        return "parallel" if self.kind == "parallel" else "sequential"


@dataclass
class MemberOutcome:
    member: str
    state: RunState
    turn: Turn | None
    error: str | None = None


@dataclass
class PatternRunResult:
    kind: str
    outcomes: list[MemberOutcome]

    def by_member(self) -> dict[str, MemberOutcome]:
        return {outcome.member: outcome for outcome in self.outcomes}


def build_pattern(
    kind: str,
    agents: list[AgentDef],
    edges: list[tuple[str, str]],
    entry: str,
    registry: AgentRegistry,
    communication: dict[tuple[str, str], str] | None = None,
    context: str = "shared",
    decision: Callable[[RunState], str] | None = None,
) -> Pattern:
    """Validate structure per kind and wire handoff tools onto members."""
    if kind not in PATTERN_KINDS:
        raise PatternError(f"unknown pattern kind: {kind}")
    names = {agent.name for agent in agents}
    if entry not in names:
        raise PatternError(f"entry agent {entry!r} is not a member")
    for src, dst in edges:
        if src not in names or dst not in names:
            raise PatternError(f"edge ({src}, {dst}) references a non-member")
    if kind == "auction" and decision is None:
        raise PatternError("auction patterns require a decision callback")
    if context not in ("shared", "split"):
        raise PatternError(f"unknown context policy: {context}")

    _validate_structure(kind, names, edges, entry)

    for agent in agents:
        if not registry.has(agent.name):
            registry.register(agent, defer_validation=True)
    communication = dict(communication or {})
    for src, dst in edges:
        registry.add_handoff(src, dst)
        policy = communication.get((src, dst), "shared")
        if policy not in ("shared", "fresh"):
            raise PatternError(f"edge ({src}, {dst}): unknown policy {policy!r}")
        if policy == "fresh":
            # Engine handoff policy is per source agent; a single fresh edge
            # marks the whole source fresh.
            registry.get(src).handoff_context = "fresh"

    pattern = Pattern(
        kind=kind,
        agents={agent.name: agent for agent in agents},
        edges=list(edges),
        entry=entry,
        communication=communication,
        context=context,
        decision=decision,
    )
    for agent in agents:
        agent.pattern_tag = kind
    return pattern


def _validate_structure(
    kind: str, names: set[str], edges: list[tuple[str, str]], entry: str
) -> None:
    adjacency: dict[str, set[str]] = {name: set() for name in names}
    for src, dst in edges:
        adjacency[src].add(dst)

    if kind == "chain":
        # A simple path from the entry: every node at most one successor,
        # no revisits, all members on the path.
        seen = [entry]
        current = entry
        while True:
            successors = adjacency[current]
            if len(successors) > 1:
                raise PatternError(
                    f"chain branching at {current!r}: {sorted(successors)}"
                )
            if not successors:
                break
            nxt = next(iter(successors))
            if nxt in seen:
                raise PatternError(f"chain revisits {nxt!r}")
            seen.append(nxt)
            current = nxt
        if set(seen) != names:
            raise PatternError(
                f"chain does not cover all members: {sorted(names - set(seen))}"
            )
    elif kind == "swarm":
        if len(names) > 1 and not _strongly_connected(names, adjacency):
            raise PatternError("swarm handoff graph is not strongly connected")
    elif kind == "recursive":
        if (entry, entry) not in edges:
            raise PatternError("recursive pattern requires a self-edge on the entry")
    elif kind == "hierarchical":
        # Star rooted at the entry: every edge touches the root.
        for src, dst in edges:
            if entry not in (src, dst):
                raise PatternError(
                    f"hierarchical edge ({src}, {dst}) bypasses the root {entry!r}"
                )


def _strongly_connected(names: set[str], adjacency: dict[str, set[str]]) -> bool:
    reverse: dict[str, set[str]] = {name: set() for name in names}
    for src, dsts in adjacency.items():
        for dst in dsts:
            reverse[dst].add(src)
    start = next(iter(names))
    return _reaches_all(start, adjacency, names) and _reaches_all(
        start, reverse, names
    )


def _reaches_all(start: str, adjacency: dict[str, set[str]], names: set[str]) -> bool:
    seen = {start}
    frontier = [start]
    while frontier:
        node = frontier.pop()
        for nxt in adjacency[node]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen == names


def run_pattern(
    engine: Engine,
    pattern: Pattern,
    task: str,
    max_interactions: int = 10,
    run_id_prefix: str = "pattern",
) -> PatternRunResult:
    if pattern.execution == "sequential":
        entry = pattern.agents[pattern.entry]
        state = RunState(run_id=f"{run_id_prefix}-run", active_agent=entry)
        if pattern.decision is not None:
            state.active_agent = pattern.agents[pattern.decision(state)]
        state.add_user_task(task)
        turn = engine.run_turn(state, max_interactions=max_interactions)
        return PatternRunResult(
            kind=pattern.kind,
            outcomes=[MemberOutcome(state.active_agent.name, state, turn)],
        )

    # Parallel: one run per member, concurrently. Shared context aliases a
    # single history list; split gives each member its own copy of the task.
    shared_history: list | None = [] if pattern.context == "shared" else None
    outcomes: list[MemberOutcome] = []
    threads: list[threading.Thread] = []
    lock = threading.Lock()

    def _launch(member: AgentDef) -> None:
        state = RunState(run_id=f"{run_id_prefix}-{member.name}", active_agent=member)
        if shared_history is not None:
            state.history = shared_history
        else:
            state.add_user_task(task)
        outcome = MemberOutcome(member.name, state, None)
        try:
            outcome.turn = engine.run_turn(state, max_interactions=max_interactions)
        except Exception as exc:  # member failure must not sink the others
            outcome.error = f"{type(exc).__name__}: {exc}"
        with lock:
            outcomes.append(outcome)

    if shared_history is not None:
        # One shared task message, not one per member.
        shared_history.append(_task_message(task))

    for member in pattern.agents.values():
        threads.append(threading.Thread(target=_launch, args=(member,)))
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    outcomes.sort(key=lambda o: list(pattern.agents).index(o.member))
    return PatternRunResult(kind=pattern.kind, outcomes=outcomes)


def _task_message(task: str):
    from .gateway import ChatMessage

    return ChatMessage(role="user", content=task)


def load_preset(name: str, registry: AgentRegistry, model) -> Pattern:
    """Instantiate one of the built-in patterns from roster definitions."""
    from .agents import ROSTER

    if name not in PRESET_NAMES:
        raise PatternError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        )

    def agent(roster_name: str) -> AgentDef:
        if registry.has(roster_name):
            return registry.get(roster_name)
        for _, rname, instructions, tools in ROSTER:
            if rname == roster_name:
                return AgentDef(
                    name=rname,
                    instructions=instructions,
                    model=model,
                    tools=[t for t in tools if registry.tool_registry.has(t)],
                )
        raise PatternError(f"no roster agent named {roster_name!r}")

    def complete_digraph(members: list[str]) -> list[tuple[str, str]]:
        return [(a, b) for a in members for b in members if a != b]

    if name == "bb_triage_swarm":
        members = ["bug_bounter_agent", "retester_agent", "thought_agent"]
        return build_pattern(
            "swarm",
            [agent(m) for m in members],
            complete_digraph(members),
            entry="bug_bounter_agent",
            registry=registry,
        )
    if name == "redteam_swarm":
        members = ["redteam_agent", "thought_agent", "flag_discriminator"]
        return build_pattern(
            "swarm",
            [agent(m) for m in members],
            complete_digraph(members),
            entry="redteam_agent",
            registry=registry,
        )
    if name == "offsec_parallel":
        members = ["bug_bounter_agent", "redteam_agent"]
        return build_pattern(
            "parallel",
            [agent(m) for m in members],
            [],
            entry="bug_bounter_agent",
            registry=registry,
            context="split",
        )
    members = ["redteam_agent", "blueteam_agent"]
    return build_pattern(
        "parallel",
        [agent(m) for m in members],
        [],
        entry="redteam_agent",
        registry=registry,
        context="shared" if name == "red_blue_shared" else "split",
    )


def load_pattern_file(
    path: str | Path, registry: AgentRegistry, model
) -> Pattern:
    """Load a declarative pattern definition (JSON) against roster agents."""
    from .agents import ROSTER

    data = json.loads(Path(path).read_text())
    spec = data.get("pattern", data)
    members = spec["members"]
    roster = {rname: (instructions, tools) for _, rname, instructions, tools in ROSTER}
    agents = []
    for member in members:
        if registry.has(member):
            agents.append(registry.get(member))
            continue
        if member not in roster:
            raise PatternError(f"no roster agent named {member!r}")
        instructions, tools = roster[member]
        agents.append(
            AgentDef(
                name=member,
                instructions=instructions,
                model=model,
                tools=[t for t in tools if registry.tool_registry.has(t)],
            )
        )
    edges = [tuple(edge) for edge in spec.get("edges", [])]
    return build_pattern(
        spec["kind"],
        agents,
        edges,
        entry=spec.get("entry", members[0]),
        registry=registry,
        context=spec.get("context", "shared"),
    )
