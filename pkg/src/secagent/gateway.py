"""Provider-agnostic chat-completions client with usage metering.

Two backends live here: an HTTP client speaking the OpenAI-compatible
chat-completions wire protocol, and a deterministic scripted model that
replays canned completions so the whole framework is testable offline.
The gateway is stateless between calls; the full message history travels
on every request.
"""

from __future__ import annotations

import itertools
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import httpx

RETRY_ATTEMPTS = 2
RETRY_BACKOFF_SECONDS = 0.5

FINISH_KINDS = {"stop", "tool_calls", "length", "aborted"}


class GatewayError(Exception):
    """Terminal completion failure (provider rejection, script underrun)."""


class TransportError(GatewayError):
    """Retryable transport-level failure; terminal after retries."""


@dataclass(frozen=True)
class ModelRef:
    """Which model to talk to and how."""

    provider_tag: str
    model_name: str
    base_url: str | None = None
    api_key_ref: str = "OPENAI_API_KEY"

    def __post_init__(self):
        if not self.provider_tag:
            raise ValueError("provider_tag must be non-empty")


@dataclass
class ToolCallRequest:
    id: str
    tool_name: str
    arguments: dict[str, Any] = field(default_factory=dict)

    def to_wire(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "type": "function",
            "function": {
                "name": self.tool_name,
                "arguments": json.dumps(self.arguments),
            },
        }


@dataclass
class ChatMessage:
    role: str
    content: str = ""
    tool_calls: list[ToolCallRequest] = field(default_factory=list)
    tool_call_id: str | None = None

    def __post_init__(self):
        if self.role == "tool" and not self.tool_call_id:
            raise ValueError("role=tool requires tool_call_id")
        if self.tool_calls and self.role != "assistant":
            raise ValueError("tool_calls only valid on assistant messages")

    def to_wire(self) -> dict[str, Any]:
        wire: dict[str, Any] = {"role": self.role, "content": self.content}
        if self.tool_calls:
            wire["tool_calls"] = [call.to_wire() for call in self.tool_calls]
        if self.tool_call_id:
            wire["tool_call_id"] = self.tool_call_id
        return wire


@dataclass
class UsageSample:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cost_estimate: float = 0.0

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")


class UsageMeter:
    """Per-run accumulator of usage samples; safe for concurrent reads."""

    def __init__(self):
        self._lock = threading.Lock()
        self._samples: list[UsageSample] = []

    def record(self, sample: UsageSample) -> None:
        with self._lock:
            self._samples.append(sample)

    @property
    def prompt_tokens(self) -> int:
        with self._lock:
            return sum(s.prompt_tokens for s in self._samples)

    @property
    def completion_tokens(self) -> int:
        with self._lock:
            return sum(s.completion_tokens for s in self._samples)

    @property
    def total_cost(self) -> float:
        with self._lock:
            return sum(s.cost_estimate for s in self._samples)


def check_price_limit(meter: UsageMeter, limit: float | None) -> bool:
    """True on breach. Strictly-greater rule: spending exactly the limit passes."""
    if limit is None:
        return False
    return meter.total_cost > limit


@dataclass
class CompletionResult:
    message: ChatMessage
    usage: UsageSample
    finish_kind: str

    def __post_init__(self):
        if self.finish_kind not in FINISH_KINDS:
            raise ValueError(f"unknown finish_kind: {self.finish_kind}")
        if (self.finish_kind == "tool_calls") != bool(self.message.tool_calls):
            raise ValueError("finish_kind=tool_calls iff tool_calls non-empty")


@dataclass(frozen=True)
class ModelPricing:
    prompt_price: float
    completion_price: float


class PricingTable:
    """model_name -> per-token dollar prices, loadable from a text file.

    File format: a `version N` header line, then `model prompt completion`
    rows; `#` comments allowed.
    """

    def __init__(self, prices: dict[str, ModelPricing] | None = None, version: int = 1):
        self.prices = dict(prices or {})
        self.version = version

    @classmethod
    def from_file(cls, path: str | Path) -> "PricingTable":
        version = 1
        prices: dict[str, ModelPricing] = {}
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("version"):
                version = int(line.split()[1])
                continue
            name, prompt, completion = line.split()
            prices[name] = ModelPricing(float(prompt), float(completion))
        return cls(prices, version=version)

    def lookup(self, model_name: str) -> ModelPricing | None:
        return self.prices.get(model_name)

    def cost(self, model_name: str, prompt_tokens: int, completion_tokens: int) -> float | None:
        """Dollar cost, or None when the model is not priced."""
        pricing = self.lookup(model_name)
        if pricing is None:
            return None
        return (
            prompt_tokens * pricing.prompt_price
            + completion_tokens * pricing.completion_price
        )


@dataclass
class ScriptEntry:
    """One canned completion for the scripted model."""

    content: str = ""
    tool_calls: list[ToolCallRequest] = field(default_factory=list)
    prompt_tokens: int = 0
    completion_tokens: int = 0
    finish_kind: str | None = None

    def to_result(self) -> CompletionResult:
        finish = self.finish_kind or ("tool_calls" if self.tool_calls else "stop")
        return CompletionResult(
            message=ChatMessage(
                role="assistant", content=self.content, tool_calls=list(self.tool_calls)
            ),
            usage=UsageSample(self.prompt_tokens, self.completion_tokens),
            finish_kind=finish,
        )


class _Script:
    def __init__(self, entries: Sequence[ScriptEntry]):
        if not entries:
            raise ValueError("script must be non-empty")
        self._entries = list(entries)
        self._cursor = 0
        self._lock = threading.Lock()

    def pop(self) -> ScriptEntry:
        with self._lock:
            if self._cursor >= len(self._entries):
                raise GatewayError("script underrun")
            entry = self._entries[self._cursor]
            self._cursor += 1
            return entry


class ModelGateway:
    """Entry point for completions against scripted or HTTP-backed models."""

    def __init__(
        self,
        pricing: PricingTable | None = None,
        api_keys: dict[str, str] | None = None,
        transport: httpx.Client | None = None,
        sleep=time.sleep,
    ):
        self.pricing = pricing or PricingTable()
        self.api_keys = api_keys or {}
        self._transport = transport
        self._sleep = sleep
        self._scripts: dict[str, _Script] = {}
        self._script_counter = itertools.count(1)
        self.on_unpriced_model = None  # callback(model_name), set by the engine

    def make_scripted_model(
        self, script: Sequence[ScriptEntry], name: str | None = None
    ) -> ModelRef:
        """Register a canned script and return a ModelRef that replays it."""
        name = name or f"scripted-{next(self._script_counter)}"
        self._scripts[name] = _Script(script)
        return ModelRef(provider_tag="scripted", model_name=name)

    def complete(
        self,
        model: ModelRef,
        history: Sequence[ChatMessage],
        tools: Sequence[dict[str, Any]] = (),
        meter: UsageMeter | None = None,
    ) -> CompletionResult:
        if not history:
            raise ValueError("history must be non-empty")
        if model.provider_tag == "scripted":
            result = self._scripts[model.model_name].pop().to_result()
        else:
            result = self._complete_http(model, history, tools)
        result = self._price(model, result)
        if meter is not None:
            meter.record(result.usage)
        return result

    def _price(self, model: ModelRef, result: CompletionResult) -> CompletionResult:
        usage = result.usage
        cost = self.pricing.cost(
            model.model_name, usage.prompt_tokens, usage.completion_tokens
        )
        if cost is None:
            cost = 0.0
            if self.on_unpriced_model is not None:
                self.on_unpriced_model(model.model_name)
        usage.cost_estimate = cost
        return result

    def _complete_http(
        self,
        model: ModelRef,
        history: Sequence[ChatMessage],
        tools: Sequence[dict[str, Any]],
    ) -> CompletionResult:
        base_url = (model.base_url or "https://api.openai.com/v1").rstrip("/")
        body: dict[str, Any] = {
            "model": model.model_name,
            "messages": [message.to_wire() for message in history],
        }
        if tools:
            body["tools"] = list(tools)
        headers = {}
        api_key = self.api_keys.get(model.api_key_ref)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        client = self._transport or httpx.Client(timeout=60.0)
        last_error: Exception | None = None
        try:
            for attempt in range(RETRY_ATTEMPTS + 1):
                if attempt:
                    self._sleep(RETRY_BACKOFF_SECONDS * 2 ** (attempt - 1))
                try:
                    response = client.post(
                        f"{base_url}/chat/completions", json=body, headers=headers
                    )
                except httpx.TransportError as exc:
                    last_error = exc
                    continue
                if response.status_code >= 400:
                    raise GatewayError(
                        f"provider rejected request ({response.status_code}): "
                        f"{response.text[:500]}"
                    )
                return _parse_completion(response.json())
            raise TransportError(f"transport failed after retries: {last_error}")
        finally:
            if self._transport is None:
                client.close()


def _parse_completion(data: dict[str, Any]) -> CompletionResult:
    choice = data["choices"][0]
    raw_message = choice["message"]
    tool_calls = [
        ToolCallRequest(
            id=call["id"],
            tool_name=call["function"]["name"],
            arguments=json.loads(call["function"]["arguments"] or "{}"),
        )
        for call in raw_message.get("tool_calls") or []
    ]
    message = ChatMessage(
        role="assistant",
        content=raw_message.get("content") or "",
        tool_calls=tool_calls,
    )
    usage = data.get("usage") or {}
    finish = choice.get("finish_reason") or "stop"
    # Keep the invariant finish_kind=tool_calls iff tool_calls non-empty even
    # when a provider reports an inconsistent finish_reason.
    if tool_calls:
        finish = "tool_calls"
    elif finish == "tool_calls" or finish not in FINISH_KINDS:
        finish = "stop"
    return CompletionResult(
        message=message,
        usage=UsageSample(
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
        ),
        finish_kind=finish,
    )
