"""Control API: run lifecycle, SSE event stream, approvals, steering."""

import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from secagent.app import App
from secagent.config import load_config
from secagent.control import make_app

from conftest import calls, stop, tool_call


@pytest.fixture
def app(tmp_path):
    config = load_config(environ={"CAI_WORKSPACE_DIR": str(tmp_path)})
    return App(config=config)


@pytest.fixture
def client(app):
    return TestClient(make_app(app))


def scripted(app, entries, agent="one_tool_agent"):
    app.agents.get(agent).model = app.gateway.make_scripted_model(entries)
    return agent


def start_run(client, app, entries, task="go", run_id=None, **kwargs):
    agent = scripted(app, entries)
    body = {"agent": agent, "task": task}
    if run_id:
        body["run_id"] = run_id
    response = client.post("/runs", json=body)
    assert response.status_code == 200
    return response.json()["run_id"]


def wait_done(app, run_id, timeout=10.0):
    assert app.runs.wait(run_id, timeout).done.is_set()


def parse_sse(text):
    """-> list of (id, event, data-dict|None) frames."""
    frames = []
    for block in text.strip().split("\n\n"):
        frame = {"id": None, "event": None, "data": None}
        for line in block.splitlines():
            key, _, value = line.partition(": ")
            frame[key] = value
        data = json.loads(frame["data"]) if frame["data"] else None
        frames.append((frame["id"], frame["event"], data))
    return frames


class TestRunLifecycle:
    def test_create_and_finish(self, app, client):
        run_id = start_run(client, app, [stop("report ready")])
        wait_done(app, run_id)
        state = client.get(f"/runs/{run_id}/state").json()
        assert state["status"] == "finished"
        assert state["end_reason"] == "quiescent"
        assert state["agent"] == "one_tool_agent"
        assert state["pending_approval"] is None

    def test_listing_includes_the_run(self, app, client):
        run_id = start_run(client, app, [stop()], run_id="listed-run")
        wait_done(app, run_id)
        assert "listed-run" in [r["run_id"] for r in client.get("/runs").json()]

    def test_unknown_agent_404_names_roster(self, client):
        response = client.post("/runs", json={"agent": "ghost", "task": "x"})
        assert response.status_code == 404
        assert "one_tool_agent" in response.json()["detail"]["roster"]

    def test_unknown_run_404s_everywhere(self, client):
        assert client.get("/runs/nope/state").status_code == 404
        assert client.get("/runs/nope/trace").status_code == 404
        assert client.post("/runs/nope/interrupt").status_code == 404
        assert client.post("/runs/nope/messages", json={"text": "x"}).status_code == 404
        assert client.post(
            "/runs/nope/agent", json={"name": "one_tool_agent"}
        ).status_code == 404

    def test_agent_roster_endpoint(self, client):
        names = client.get("/agents").json()
        assert "redteam_agent" in names and len(names) == 17


class TestEventStream:
    def test_replay_after_completion(self, app, client):
        run_id = start_run(client, app, [calls(tool_call("think", thought="x")), stop()])
        wait_done(app, run_id)
        frames = parse_sse(client.get(f"/runs/{run_id}/events").text)
        assert frames[-1][1] == "end"
        kinds = [data["kind"] for _, event, data in frames if event == "trace"]
        assert kinds.count("inference") == 2
        assert kinds.count("tool_call") == 1

    def test_sequences_strictly_increase_without_duplicates(self, app, client):
        run_id = start_run(client, app, [stop()])
        wait_done(app, run_id)
        frames = parse_sse(client.get(f"/runs/{run_id}/events").text)
        ids = [int(i) for i, event, _ in frames if event == "trace"]
        assert ids == sorted(set(ids))

    def test_reconnect_from_sequence_skips_prefix(self, app, client):
        run_id = start_run(client, app, [stop()])
        wait_done(app, run_id)
        full = parse_sse(client.get(f"/runs/{run_id}/events").text)
        trace_ids = [int(i) for i, event, _ in full if event == "trace"]
        cursor = trace_ids[1]
        resumed = parse_sse(client.get(f"/runs/{run_id}/events?from={cursor}").text)
        resumed_ids = [int(i) for i, event, _ in resumed if event == "trace"]
        assert resumed_ids == trace_ids[1:]

    def test_two_subscribers_see_identical_streams(self, app, client):
        run_id = start_run(client, app, [calls(tool_call("think", thought="x")), stop()])
        wait_done(app, run_id)
        first = client.get(f"/runs/{run_id}/events").text
        second = client.get(f"/runs/{run_id}/events").text
        assert first == second

    def test_trace_endpoint_matches_stream_payloads(self, app, client):
        run_id = start_run(client, app, [stop()])
        wait_done(app, run_id)
        trace_lines = client.get(f"/runs/{run_id}/trace").text.strip().splitlines()
        header = json.loads(trace_lines[0])
        assert header == {"schema": 1}
        exported = [json.loads(line)["event_id"] for line in trace_lines[1:]]
        frames = parse_sse(client.get(f"/runs/{run_id}/events").text)
        streamed = [data["event_id"] for _, event, data in frames if event == "trace"]
        assert exported == streamed

    def test_normalized_trace_is_deterministic(self, app, client):
        first = start_run(client, app, [stop("same")], run_id="twin", task="same task")
        wait_done(app, first)
        other_app = App(config=app.config)
        other_client = TestClient(make_app(other_app))
        second = start_run(other_client, other_app, [stop("same")],
                           run_id="twin", task="same task")
        wait_done(other_app, second)
        a = client.get("/runs/twin/trace?normalize=1").text
        b = other_client.get("/runs/twin/trace?normalize=1").text
        assert a == b


class TestSteering:
    def test_interrupt_stops_a_long_run(self, app, client):
        # think() blocks until the gate opens, keeping the run alive.
        gate = threading.Event()
        agent = app.agents.get("one_tool_agent")
        entries = [calls(tool_call("slow_think")) for _ in range(50)]

        from secagent.toolbelt import ToolDescriptor, ToolOutput, ToolParam

        app.tools.register(
            ToolDescriptor(
                name="slow_think", description="blocks until released",
                parameter_schema={}, category="other", effect_class="read_only",
            ),
            lambda: (gate.wait(5), ToolOutput(text="released"))[1],
        )
        agent.model = app.gateway.make_scripted_model(entries)
        run_id = client.post(
            "/runs", json={"agent": "one_tool_agent", "task": "spin",
                           "max_interactions": 50},
        ).json()["run_id"]
        time.sleep(0.1)
        assert client.post(f"/runs/{run_id}/interrupt").json() == {"interrupted": True}
        gate.set()
        wait_done(app, run_id)
        state = client.get(f"/runs/{run_id}/state").json()
        assert state["end_reason"] == "operator_abort"
        assert state["interaction_count"] < 50

    def test_injected_message_reaches_history(self, app, client):
        run_id = start_run(client, app, [stop("first")], run_id="steer")
        wait_done(app, run_id)
        client.post(f"/runs/{run_id}/messages", json={"text": "also check udp"})
        state = app.runs.get(run_id).state
        app.runs.start("one_tool_agent", "next task", state=state)
        wait_done(app, run_id)
        user_messages = [m.content for m in state.history if m.role == "user"]
        assert "also check udp" in user_messages

    def test_switch_agent_requires_known_name(self, app, client):
        run_id = start_run(client, app, [stop()])
        wait_done(app, run_id)
        response = client.post(f"/runs/{run_id}/agent", json={"name": "ghost"})
        assert response.status_code == 404
        ok = client.post(f"/runs/{run_id}/agent", json={"name": "redteam_agent"})
        assert ok.json() == {"queued": True}


class TestApprovals:
    @pytest.fixture
    def gated(self, app):
        app.broker.enabled = True
        app.broker.timeout = 5.0
        return app

    def _start_gated_run(self, gated, client, run_id="gated"):
        scripted(gated, [calls(tool_call("execute_code", code="print(1)")), stop()])
        client.post("/runs", json={"agent": "one_tool_agent", "task": "t",
                                   "run_id": run_id})
        deadline = time.monotonic() + 5
        while time.monotonic() < deadline:
            pending = client.get(f"/runs/{run_id}/approvals/pending").json()
            if pending:
                return pending
            time.sleep(0.05)
        raise AssertionError("no approval request materialized")

    def test_approve_lets_the_tool_run(self, gated, client):
        pending = self._start_gated_run(gated, client)
        assert pending["tool_name"] == "execute_code"
        response = client.post(
            f"/runs/gated/approvals/{pending['request_id']}",
            json={"decision": "approve"},
        )
        assert response.json()["status"] == "approved"
        wait_done(gated, "gated")
        replies = [m.content for m in gated.runs.get("gated").state.history
                   if m.role == "tool"]
        assert replies == ["1\n"]

    def test_deny_substitutes_the_refusal(self, gated, client):
        pending = self._start_gated_run(gated, client)
        client.post(f"/runs/gated/approvals/{pending['request_id']}",
                    json={"decision": "deny"})
        wait_done(gated, "gated")
        replies = [m.content for m in gated.runs.get("gated").state.history
                   if m.role == "tool"]
        assert replies == ["denied by operator"]

    def test_unresolved_request_expires_to_deny(self, gated, client):
        gated.broker.timeout = 0.3
        self._start_gated_run(gated, client)
        wait_done(gated, "gated")
        replies = [m.content for m in gated.runs.get("gated").state.history
                   if m.role == "tool"]
        assert replies == ["denied by operator"]

    def test_double_resolution_conflicts(self, gated, client):
        pending = self._start_gated_run(gated, client)
        url = f"/runs/gated/approvals/{pending['request_id']}"
        assert client.post(url, json={"decision": "approve"}).status_code == 200
        assert client.post(url, json={"decision": "deny"}).status_code == 409
        wait_done(gated, "gated")

    def test_bad_decision_is_422(self, gated, client):
        pending = self._start_gated_run(gated, client)
        url = f"/runs/gated/approvals/{pending['request_id']}"
        assert client.post(url, json={"decision": "maybe"}).status_code == 422
        client.post(url, json={"decision": "deny"})
        wait_done(gated, "gated")

    def test_unknown_request_404(self, gated, client):
        run_id = start_run(client, gated, [stop()])
        wait_done(gated, run_id)
        response = client.post(f"/runs/{run_id}/approvals/apr-999",
                               json={"decision": "approve"})
        assert response.status_code == 404

    def test_resolution_is_traced(self, gated, client):
        pending = self._start_gated_run(gated, client)
        client.post(f"/runs/gated/approvals/{pending['request_id']}",
                    json={"decision": "approve"})
        wait_done(gated, "gated")
        operator = [e for e in gated.tracer.events("gated") if e.kind == "operator"]
        assert any(e.payload.get("action") == "approval_approved" for e in operator)


class TestAuth:
    def test_token_required_when_configured(self, app):
        client = TestClient(make_app(app, token="hunter2"))
        assert client.get("/runs").status_code == 401
        ok = client.get("/runs", headers={"Authorization": "Bearer hunter2"})
        assert ok.status_code == 200

    def test_wrong_token_rejected(self, app):
        client = TestClient(make_app(app, token="hunter2"))
        response = client.get("/runs", headers={"Authorization": "Bearer nope"})
        assert response.status_code == 401
