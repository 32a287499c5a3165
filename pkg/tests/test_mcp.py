"""MCP client against the bundled stdio reference server."""

import json
import subprocess
import sys
import time

import pytest

from secagent.mcp import McpError, McpManager
from secagent.mcp.toyserver import PROTOCOL_VERSION, handle as server_handle

from conftest import calls, stop, tool_call

TOY_COMMAND = f"{sys.executable} -m secagent.mcp.toyserver"


@pytest.fixture
def manager(harness):
    mgr = McpManager(harness.tools, harness.agents)
    yield mgr
    mgr.close_all()


def load_toy(manager, name="toy"):
    return manager.load_stdio(name, TOY_COMMAND)


class TestToyServerContract:
    # The in-process handler doubles as an oracle for proxy fidelity checks.
    def test_initialize_reports_protocol(self):
        response = server_handle(
            {"jsonrpc": "2.0", "id": 1, "method": "initialize", "params": {}}
        )
        assert response["result"]["protocolVersion"] == PROTOCOL_VERSION

    def test_add_oracle(self):
        response = server_handle({
            "jsonrpc": "2.0", "id": 2, "method": "tools/call",
            "params": {"name": "add", "arguments": {"a": 2, "b": 3}},
        })
        text = response["result"]["content"][0]["text"]
        assert text == "5"

    def test_unknown_method_is_error(self):
        response = server_handle({"jsonrpc": "2.0", "id": 3, "method": "bogus"})
        assert "error" in response


class TestStdioSession:
    def test_listing_exposes_both_tools(self, manager):
        handle = load_toy(manager)
        assert sorted(t["name"] for t in handle.tools) == ["add", "echo"]
        assert handle.negotiated_version == PROTOCOL_VERSION

    def test_add_round_trip_under_ten_seconds(self, manager):
        started = time.monotonic()
        handle = load_toy(manager)
        assert handle.call_tool("add", {"a": 2, "b": 3}) == "5"
        assert time.monotonic() - started < 10

    def test_echo_round_trip(self, manager):
        handle = load_toy(manager)
        assert handle.call_tool("echo", {"text": "ping"}) == "ping"

    def test_proxy_matches_in_process_oracle(self, manager):
        handle = load_toy(manager)
        for a, b in [(0, 0), (-4, 9), (123, 877)]:
            oracle = server_handle({
                "jsonrpc": "2.0", "id": 99, "method": "tools/call",
                "params": {"name": "add", "arguments": {"a": a, "b": b}},
            })["result"]["content"][0]["text"]
            assert handle.call_tool("add", {"a": a, "b": b}) == oracle

    def test_duplicate_server_name_rejected(self, manager):
        load_toy(manager)
        with pytest.raises(McpError, match="already in use"):
            load_toy(manager)

    def test_dead_server_reports_not_live(self, manager):
        handle = load_toy(manager)
        handle.transport.close()
        time.sleep(0.1)
        assert not handle.live
        assert manager.list_servers()[0]["live"] is False

    def test_unlaunchable_command_errors(self, manager):
        with pytest.raises(McpError):
            manager.load_stdio("ghost", "/nonexistent/mcp-server")

    def test_list_servers_row_shape(self, manager):
        load_toy(manager)
        (row,) = manager.list_servers()
        assert row == {"name": "toy", "transport": "stdio",
                       "tool_count": 2, "live": True}


class TestAgentAttachment:
    def test_tools_attach_and_dispatch(self, harness, manager):
        agent = harness.agent("operator", [stop()])
        load_toy(manager)
        assert manager.add_to_agent("toy", "operator") == 2
        assert "add" in agent.tools and "echo" in agent.tools
        output = harness.tools.dispatch("add", {"a": 2, "b": 3})
        assert output.text == "5"

    def test_re_add_is_noop(self, harness, manager):
        harness.agent("operator", [stop()])
        load_toy(manager)
        manager.add_to_agent("toy", "operator")
        assert manager.add_to_agent("toy", "operator") == 0

    def test_collision_registers_qualified_name(self, harness, manager):
        # "echo" collides with a pre-registered local tool of the same name.
        from secagent.toolbelt import ToolDescriptor, ToolOutput, ToolParam

        harness.tools.register(
            ToolDescriptor(
                name="echo", description="local echo",
                parameter_schema={"text": ToolParam("string", required=True)},
                category="other", effect_class="read_only",
            ),
            lambda text: ToolOutput(text=f"local:{text}"),
        )
        agent = harness.agent("operator", [stop()])
        load_toy(manager)
        assert manager.add_to_agent("toy", "operator") == 2
        assert "echo@toy" in agent.tools
        assert harness.tools.dispatch("echo", {"text": "x"}).text == "local:x"
        assert harness.tools.dispatch("echo@toy", {"text": "x"}).text == "x"

    def test_remote_tools_are_policy_gated(self, tmp_path):
        from conftest import Harness

        harness = Harness(tmp_path, policy=lambda d, a: "deny")
        harness.agent("operator", [stop()])
        manager = McpManager(harness.tools, harness.agents)
        try:
            load_toy(manager)
            manager.add_to_agent("toy", "operator")
            output = harness.tools.dispatch("add", {"a": 1, "b": 1})
            assert output.text == "denied by operator"
        finally:
            manager.close_all()

    def test_agent_can_call_remote_tool_through_engine(self, harness, manager):
        agent = harness.agent(
            "operator",
            [calls(tool_call("add", a=2, b=3)), stop("sum is 5")],
        )
        load_toy(manager)
        manager.add_to_agent("toy", "operator")
        state = harness.state(agent)
        turn = harness.engine.run_turn(state)
        assert turn.end_reason == "quiescent"
        replies = [m.content for m in state.history if m.role == "tool"]
        assert replies == ["5"]


class TestSseTransport:
    def test_refused_connection_is_clean_error(self, manager):
        with pytest.raises(McpError, match="cannot establish event stream"):
            manager.load_sse("dead", "http://127.0.0.1:9/sse")

    def test_full_session_over_sse(self, manager):
        # Minimal HTTP bridge: GET /sse announces a message endpoint, each
        # POST there runs through the in-process server handler and the
        # response comes back on the event stream.
        import http.server
        import queue
        import threading

        outbox: "queue.Queue[str]" = queue.Queue()

        class Bridge(http.server.BaseHTTPRequestHandler):
            def do_GET(self):
                self.send_response(200)
                self.send_header("Content-Type", "text/event-stream")
                self.end_headers()
                self.wfile.write(b"event: endpoint\ndata: /messages\n\n")
                self.wfile.flush()
                while True:
                    payload = outbox.get()
                    if payload is None:
                        return
                    frame = f"event: message\ndata: {payload}\n\n"
                    self.wfile.write(frame.encode())
                    self.wfile.flush()

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                request = json.loads(self.rfile.read(length))
                response = server_handle(request)
                self.send_response(202)
                self.end_headers()
                if response is not None:
                    outbox.put(json.dumps(response))

            def log_message(self, *args):
                pass

        server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Bridge)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        try:
            handle = manager.load_sse(
                "toy-sse", f"http://127.0.0.1:{server.server_port}/sse"
            )
            assert sorted(t["name"] for t in handle.tools) == ["add", "echo"]
            assert handle.call_tool("add", {"a": 2, "b": 3}) == "5"
            assert manager.list_servers()[0]["transport"] == "sse"
        finally:
            outbox.put(None)
            server.shutdown()
