"""Scripted model, pricing, metering, and the HTTP completion path."""

import json

import httpx
import pytest

from secagent.gateway import (
    ChatMessage,
    GatewayError,
    ModelGateway,
    ModelPricing,
    PricingTable,
    ScriptEntry,
    ToolCallRequest,
    TransportError,
    UsageMeter,
    UsageSample,
    check_price_limit,
)


def _history():
    return [ChatMessage(role="user", content="hello")]


class TestScriptedModel:
    def test_pass_through_stop(self):
        gateway = ModelGateway()
        model = gateway.make_scripted_model([ScriptEntry(content="done")])
        result = gateway.complete(model, _history())
        assert result.finish_kind == "stop"
        assert result.message.content == "done"

    def test_pass_through_tool_call(self):
        gateway = ModelGateway()
        call = ToolCallRequest(id="c1", tool_name="nmap",
                               arguments={"target": "192.168.1.1"})
        model = gateway.make_scripted_model([ScriptEntry(tool_calls=[call])])
        result = gateway.complete(model, _history())
        assert result.finish_kind == "tool_calls"
        assert len(result.message.tool_calls) == 1
        assert result.message.tool_calls[0].tool_name == "nmap"

    def test_entries_returned_in_order(self):
        gateway = ModelGateway()
        model = gateway.make_scripted_model(
            [ScriptEntry(content=c) for c in ("one", "two", "three")]
        )
        outputs = [gateway.complete(model, _history()).message.content for _ in range(3)]
        assert outputs == ["one", "two", "three"]

    def test_script_underrun(self):
        gateway = ModelGateway()
        model = gateway.make_scripted_model([ScriptEntry(content="only")])
        gateway.complete(model, _history())
        with pytest.raises(GatewayError, match="script underrun"):
            gateway.complete(model, _history())

    def test_empty_script_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            ModelGateway().make_scripted_model([])

    def test_empty_history_rejected(self):
        gateway = ModelGateway()
        model = gateway.make_scripted_model([ScriptEntry(content="x")])
        with pytest.raises(ValueError, match="history"):
            gateway.complete(model, [])

    def test_statelessness_result_independent_of_prior_histories(self):
        gateway = ModelGateway()
        model = gateway.make_scripted_model(
            [ScriptEntry(content="a"), ScriptEntry(content="b")]
        )
        first = gateway.complete(model, _history())
        second = gateway.complete(
            model, [ChatMessage(role="user", content="совершенно different")]
        )
        assert (first.message.content, second.message.content) == ("a", "b")


class TestPricing:
    def test_cost_arithmetic(self):
        # 1000 * 2e-06 + 500 * 6e-06 = 0.005, by hand.
        table = PricingTable({"m": ModelPricing(2e-06, 6e-06)})
        assert table.cost("m", 1000, 500) == pytest.approx(0.005)

    def test_metered_cost_from_declared_usage(self):
        table = PricingTable({"m": ModelPricing(2e-06, 6e-06)})
        gateway = ModelGateway(pricing=table)
        model = gateway.make_scripted_model(
            [ScriptEntry(content="x", prompt_tokens=1000, completion_tokens=500)],
            name="m",
        )
        meter = UsageMeter()
        gateway.complete(model, _history(), meter=meter)
        assert meter.total_cost == pytest.approx(0.005)
        assert meter.prompt_tokens == 1000
        assert meter.completion_tokens == 500

    def test_unknown_model_meters_cost_zero(self):
        gateway = ModelGateway()
        model = gateway.make_scripted_model(
            [ScriptEntry(content="x", prompt_tokens=10, completion_tokens=10)]
        )
        meter = UsageMeter()
        gateway.complete(model, _history(), meter=meter)
        assert meter.total_cost == 0.0
        assert meter.prompt_tokens == 10

    def test_pricing_file_round_trip(self, tmp_path):
        path = tmp_path / "pricing.txt"
        path.write_text("# prices\nversion 2\nm1 1e-06 2e-06\nm2 3e-06 4e-06\n")
        table = PricingTable.from_file(path)
        assert table.version == 2
        assert table.lookup("m1") == ModelPricing(1e-06, 2e-06)
        assert table.lookup("m2").completion_price == 4e-06


class TestPriceLimit:
    def _meter(self, cost: float) -> UsageMeter:
        meter = UsageMeter()
        meter.record(UsageSample(cost_estimate=cost))
        return meter

    def test_under_limit_passes(self):
        assert check_price_limit(self._meter(0.004), 0.005) is False

    def test_boundary_passes_strictly_greater_rule(self):
        assert check_price_limit(self._meter(0.005), 0.005) is False

    def test_over_limit_breaches(self):
        assert check_price_limit(self._meter(0.0051), 0.005) is True

    def test_unset_limit_never_breaches(self):
        assert check_price_limit(self._meter(1e9), None) is False

    def test_meter_monotonic(self):
        meter = UsageMeter()
        totals = []
        for _ in range(5):
            meter.record(UsageSample(cost_estimate=0.001))
            totals.append(meter.total_cost)
        assert totals == sorted(totals)


class TestMessageInvariants:
    def test_tool_message_requires_correlation_id(self):
        with pytest.raises(ValueError, match="tool_call_id"):
            ChatMessage(role="tool", content="output")

    def test_tool_calls_only_on_assistant(self):
        call = ToolCallRequest(id="c", tool_name="t")
        with pytest.raises(ValueError, match="assistant"):
            ChatMessage(role="user", content="x", tool_calls=[call])


class TestHttpBackend:
    def _gateway_with(self, handler, sleeps=None):
        transport = httpx.MockTransport(handler)
        client = httpx.Client(transport=transport)
        recorded = sleeps if sleeps is not None else []
        return ModelGateway(transport=client, sleep=recorded.append)

    def test_full_history_sent_and_response_parsed(self):
        seen = {}

        def handler(request):
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json={
                "choices": [{"message": {"content": "hi"}, "finish_reason": "stop"}],
                "usage": {"prompt_tokens": 3, "completion_tokens": 1},
            })

        gateway = self._gateway_with(handler)
        from secagent.gateway import ModelRef

        history = [
            ChatMessage(role="system", content="sys"),
            ChatMessage(role="user", content="u1"),
            ChatMessage(role="assistant", content="a1"),
            ChatMessage(role="user", content="u2"),
        ]
        result = gateway.complete(ModelRef("openai", "m"), history)
        assert [m["role"] for m in seen["body"]["messages"]] == [
            "system", "user", "assistant", "user",
        ]
        assert result.message.content == "hi"
        assert result.usage.prompt_tokens == 3

    def test_provider_rejection_is_terminal(self):
        def handler(request):
            return httpx.Response(400, text="bad request: no such model")

        gateway = self._gateway_with(handler)
        from secagent.gateway import ModelRef

        with pytest.raises(GatewayError, match="no such model"):
            gateway.complete(ModelRef("openai", "m"), _history())

    def test_transport_failure_retries_then_terminal(self):
        attempts = []

        def handler(request):
            attempts.append(1)
            raise httpx.ConnectError("boom")

        sleeps = []
        gateway = self._gateway_with(handler, sleeps=sleeps)
        from secagent.gateway import ModelRef

        with pytest.raises(TransportError):
            gateway.complete(ModelRef("openai", "m"), _history())
        assert len(attempts) == 3  # initial + 2 retries
        assert sleeps == [0.5, 1.0]  # exponential backoff from 500 ms

    def test_tool_call_response_parsed(self):
        def handler(request):
            return httpx.Response(200, json={
                "choices": [{
                    "message": {
                        "content": None,
                        "tool_calls": [{
                            "id": "c9",
                            "type": "function",
                            "function": {"name": "nmap",
                                         "arguments": '{"target": "10.0.0.1"}'},
                        }],
                    },
                    "finish_reason": "tool_calls",
                }],
            })

        gateway = self._gateway_with(handler)
        from secagent.gateway import ModelRef

        result = gateway.complete(ModelRef("openai", "m"), _history())
        assert result.finish_kind == "tool_calls"
        call = result.message.tool_calls[0]
        assert (call.id, call.tool_name, call.arguments) == (
            "c9", "nmap", {"target": "10.0.0.1"},
        )
