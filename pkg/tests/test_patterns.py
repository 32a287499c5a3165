"""Patterns: structural validation, sequential and parallel execution, presets."""

import json

import pytest

from secagent.patterns import (
    PRESET_NAMES,
    PatternError,
    build_pattern,
    load_pattern_file,
    load_preset,
    run_pattern,
)

from conftest import calls, stop, tool_call


def build(harness, kind, members, edges, entry=None, **kwargs):
    return build_pattern(
        kind, members, edges, entry or members[0].name, harness.agents, **kwargs
    )


class TestStructuralValidation:
    def test_chain_is_a_simple_path(self, harness):
        members = [harness.agent(n, [stop()]) for n in ("a", "b", "c")]
        pattern = build(harness, "chain", members, [("a", "b"), ("b", "c")])
        assert pattern.execution == "sequential"

    def test_chain_with_branch_rejected(self, harness):
        members = [harness.agent(n, [stop()]) for n in ("a", "b", "c")]
        with pytest.raises(PatternError):
            build(harness, "chain", members, [("a", "b"), ("a", "c")])

    def test_chain_missing_link_rejected(self, harness):
        members = [harness.agent(n, [stop()]) for n in ("a", "b", "c")]
        with pytest.raises(PatternError):
            build(harness, "chain", members, [("a", "b")])

    def test_swarm_requires_strong_connectivity(self, harness):
        members = [harness.agent(n, [stop()]) for n in ("a", "b", "c")]
        # a->b->c->a is strongly connected.
        build(harness, "swarm", members, [("a", "b"), ("b", "c"), ("c", "a")])

    def test_swarm_one_way_street_rejected(self, harness):
        members = [harness.agent(n, [stop()]) for n in ("a", "b")]
        with pytest.raises(PatternError):
            build(harness, "swarm", members, [("a", "b")])

    def test_hierarchical_star_at_root(self, harness):
        members = [harness.agent(n, [stop()]) for n in ("root", "x", "y")]
        build(harness, "hierarchical", members,
              [("root", "x"), ("root", "y"), ("x", "root"), ("y", "root")])

    def test_hierarchical_cross_edge_rejected(self, harness):
        members = [harness.agent(n, [stop()]) for n in ("root", "x", "y")]
        with pytest.raises(PatternError):
            build(harness, "hierarchical", members,
                  [("root", "x"), ("root", "y"), ("x", "y")])

    def test_recursive_needs_self_edge(self, harness):
        member = harness.agent("solo", [stop()])
        build(harness, "recursive", [member], [("solo", "solo")])
        other = harness.agent("other", [stop()])
        with pytest.raises(PatternError):
            build(harness, "recursive", [other], [])

    def test_auction_requires_decision_callback(self, harness):
        members = [harness.agent(n, [stop()]) for n in ("a", "b")]
        edges = [("a", "b"), ("b", "a")]
        with pytest.raises(PatternError, match="decision"):
            build(harness, "auction", members, edges)
        build(harness, "auction", members, edges, decision=lambda state: "b")

    def test_unknown_kind(self, harness):
        member = harness.agent("solo", [stop()])
        with pytest.raises(PatternError, match="unknown pattern kind"):
            build(harness, "circus", [member], [])

    def test_entry_must_be_member(self, harness):
        member = harness.agent("solo", [stop()])
        with pytest.raises(PatternError, match="not a member"):
            build(harness, "recursive", [member], [("solo", "solo")], entry="ghost")

    def test_edge_to_non_member_rejected(self, harness):
        members = [harness.agent(n, [stop()]) for n in ("a", "b")]
        with pytest.raises(PatternError, match="non-member"):
            build(harness, "swarm", members, [("a", "ghost"), ("ghost", "a")])

    def test_members_get_handoff_tools(self, harness):
        members = [harness.agent(n, [stop()]) for n in ("a", "b")]
        build(harness, "swarm", members, [("a", "b"), ("b", "a")])
        assert "b" in harness.agents.get("a").handoffs
        assert "a" in harness.agents.get("b").handoffs


class TestSequentialExecution:
    def test_chain_walks_every_member(self, harness):
        a = harness.agent("a", [calls(tool_call("transfer_to_b"))])
        b = harness.agent("b", [calls(tool_call("transfer_to_c"))])
        c = harness.agent("c", [stop("chain done")])
        pattern = build(harness, "chain", [a, b, c], [("a", "b"), ("b", "c")])
        result = run_pattern(harness.engine, pattern, "walk the chain")
        (outcome,) = result.outcomes
        assert outcome.turn.end_reason == "quiescent"
        assert outcome.member == "c"
        order = [i.agent_name for i in outcome.turn.interactions]
        assert order == ["a", "b", "c"]

    def test_recursive_member_revisits_itself(self, harness):
        solo = harness.agent(
            "solo",
            [calls(tool_call("transfer_to_solo")),
             calls(tool_call("transfer_to_solo")),
             stop("converged")],
        )
        pattern = build(harness, "recursive", [solo], [("solo", "solo")])
        result = run_pattern(harness.engine, pattern, "iterate")
        (outcome,) = result.outcomes
        assert [i.agent_name for i in outcome.turn.interactions] == ["solo"] * 3

    def test_auction_decision_picks_the_starter(self, harness):
        a = harness.agent("a", [stop("a won")])
        b = harness.agent("b", [stop("b won")])
        edges = [("a", "b"), ("b", "a")]
        pattern = build(
            harness, "auction", [a, b], edges, decision=lambda state: "b"
        )
        result = run_pattern(harness.engine, pattern, "bid")
        assert result.outcomes[0].turn.interactions[0].agent_name == "b"

    def test_fresh_edge_policy_resets_context(self, harness):
        a = harness.agent("a", [calls(tool_call("transfer_to_b"))])
        b = harness.agent("b", [stop()])
        pattern = build(
            harness, "chain", [a, b], [("a", "b")],
            communication={("a", "b"): "fresh"},
        )
        result = run_pattern(harness.engine, pattern, "start fresh")
        state = result.outcomes[0].state
        # After the fresh handoff only the task survived, plus b's reply.
        assert [m.role for m in state.history] == ["user", "assistant"]


class TestParallelExecution:
    def test_split_members_are_isolated(self, harness):
        a = harness.agent("a", [calls(tool_call("think", thought="marker-from-a")),
                                stop("a done")], tools=["think"])
        b = harness.agent("b", [stop("b done")])
        pattern = build(
            harness, "parallel", [a, b], [], context="split"
        )
        result = run_pattern(harness.engine, pattern, "divide and conquer")
        by_member = result.by_member()
        def rendered(outcome):
            parts = []
            for message in outcome.state.history:
                parts.append(message.content)
                parts.extend(str(c.arguments) for c in message.tool_calls)
            return " ".join(parts)

        a_text = rendered(by_member["a"])
        b_text = rendered(by_member["b"])
        assert "marker-from-a" in a_text
        assert "marker-from-a" not in b_text
        assert by_member["a"].state.history is not by_member["b"].state.history
        # Each member got its own copy of the task.
        assert "divide and conquer" in a_text and "divide and conquer" in b_text

    def test_shared_members_see_one_history(self, harness):
        a = harness.agent("a", [stop("alpha view")])
        b = harness.agent("b", [stop("bravo view")])
        pattern = build(harness, "parallel", [a, b], [], context="shared")
        result = run_pattern(harness.engine, pattern, "pool findings")
        histories = [o.state.history for o in result.outcomes]
        assert histories[0] is histories[1]
        tasks = [m for m in histories[0] if m.role == "user"]
        assert len(tasks) == 1  # single shared task message
        content = " ".join(m.content for m in histories[0])
        assert "alpha view" in content and "bravo view" in content

    def test_member_failure_does_not_sink_the_others(self, harness):
        # "bad" underruns its script on the first inference.
        good_entry = stop("good done")
        good = harness.agent("good", [good_entry])
        bad = harness.agent(
            "bad", [calls(tool_call("think", thought="x"))], tools=["think"]
        )
        pattern = build(harness, "parallel", [good, bad], [], context="split")
        result = run_pattern(harness.engine, pattern, "carry on")
        by_member = result.by_member()
        assert by_member["good"].turn.end_reason == "quiescent"
        assert by_member["bad"].turn.end_reason == "error"

    def test_outcomes_follow_member_order(self, harness):
        members = [harness.agent(n, [stop()]) for n in ("z", "a", "m")]
        pattern = build(harness, "parallel", members, [], context="split")
        result = run_pattern(harness.engine, pattern, "go")
        assert [o.member for o in result.outcomes] == ["z", "a", "m"]


class TestPresetsAndFiles:
    def _model(self, harness, entries=40):
        return harness.gateway.make_scripted_model([stop()] * entries)

    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_presets_build(self, harness, name):
        pattern = load_preset(name, harness.agents, self._model(harness))
        assert pattern.entry in pattern.agents
        for src, dst in pattern.edges:
            assert dst in harness.agents.get(src).handoffs

    def test_unknown_preset_lists_catalog(self, harness):
        with pytest.raises(PatternError) as excinfo:
            load_preset("nope", harness.agents, self._model(harness))
        for name in PRESET_NAMES:
            assert name in str(excinfo.value)

    def test_shared_and_split_presets_differ_only_in_context(self, harness):
        model = self._model(harness)
        shared = load_preset("red_blue_shared", harness.agents, model)
        split = load_preset("red_blue_split", harness.agents, model)
        assert shared.context == "shared" and split.context == "split"
        assert set(shared.agents) == set(split.agents)

    def test_pattern_file_round_trip(self, harness, tmp_path):
        path = tmp_path / "pattern.json"
        path.write_text(json.dumps({
            "pattern": {
                "kind": "parallel",
                "members": ["redteam_agent", "blueteam_agent"],
                "context": "split",
            }
        }))
        pattern = load_pattern_file(path, harness.agents, self._model(harness))
        assert pattern.kind == "parallel"
        assert set(pattern.agents) == {"redteam_agent", "blueteam_agent"}

    def test_pattern_file_unknown_member(self, harness, tmp_path):
        path = tmp_path / "pattern.json"
        path.write_text(json.dumps({
            "pattern": {"kind": "parallel", "members": ["nobody"]}
        }))
        with pytest.raises(PatternError, match="nobody"):
            load_pattern_file(path, harness.agents, self._model(harness))
