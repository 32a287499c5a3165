"""Layered configuration: process environment over .env file over defaults.

The variable catalog is typed; values resolve with the precedence
process env > dotenv > built-in default, and a REPL session may stack
runtime overrides on top without touching the process environment.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

REDACTION_MARKER = "[redacted]"

_TRUTHY = {"true", "1"}
_FALSY = {"false", "0"}


class ConfigError(Exception):
    """Raised when configuration fails validation at load or set time."""


def parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in _TRUTHY:
        return True
    if lowered in _FALSY:
        return False
    raise ValueError(f"expected one of true/false/1/0, got {raw!r}")


def _parse_positive_int(raw: str) -> int:
    value = int(raw)
    if value <= 0:
        raise ValueError(f"expected a positive integer, got {raw!r}")
    return value


def _parse_debug_level(raw: str) -> int:
    value = int(raw)
    if value not in (0, 1, 2):
        raise ValueError(f"allowed: 0,1,2 (got {raw!r})")
    return value


def _parse_positive_decimal(raw: str) -> float:
    value = float(raw)
    if value <= 0:
        raise ValueError(f"expected a positive decimal, got {raw!r}")
    return value


@dataclass(frozen=True)
class VarSpec:
    """One catalog entry: how a variable parses and what it defaults to."""

    name: str
    parser: Callable[[str], Any] = str
    default: Any = None
    secret: bool = False


def _specs() -> list[VarSpec]:
    return [
        VarSpec("CTF_NAME"),
        VarSpec("CTF_CHALLENGE"),
        VarSpec("CTF_SUBNET"),
        VarSpec("CTF_IP"),
        VarSpec("CTF_INSIDE", parse_bool),
        VarSpec("CAI_MODEL", default="openai/gpt-4o"),
        VarSpec("CAI_DEBUG", _parse_debug_level, default=0),
        VarSpec("CAI_BRIEF", parse_bool, default=False),
        VarSpec("CAI_MAX_TURNS", _parse_positive_int),
        VarSpec("CAI_TRACING", parse_bool, default=True),
        VarSpec("CAI_AGENT_TYPE"),
        VarSpec("CAI_STATE", parse_bool, default=False),
        VarSpec("CAI_MEMORY"),
        VarSpec("CAI_MEMORY_ONLINE", parse_bool),
        VarSpec("CAI_MEMORY_OFFLINE", parse_bool),
        VarSpec("CAI_MEMORY_ONLINE_INTERVAL", _parse_positive_int),
        VarSpec("CAI_ENV_CONTEXT", parse_bool, default=False),
        VarSpec("CAI_PRICE_LIMIT", _parse_positive_decimal),
        VarSpec("CAI_REPORT"),
        VarSpec("CAI_SUPPORT_MODEL"),
        VarSpec("CAI_SUPPORT_INTERVAL", _parse_positive_int),
        VarSpec("CAI_WORKSPACE"),
        VarSpec("CAI_WORKSPACE_DIR"),
        VarSpec("CAI_STREAM", parse_bool, default=False),
        VarSpec("CAI_TELEMETRY", parse_bool, default=False),
        VarSpec("CAI_ACTIVE_CONTAINER"),
        VarSpec("OPENAI_API_KEY", secret=True, default="sk-123"),
        VarSpec("ANTHROPIC_API_KEY", secret=True),
        VarSpec("OLLAMA"),
        VarSpec("OLLAMA_API_BASE"),
        VarSpec("OPENROUTER_API_KEY", secret=True),
        VarSpec("OPENROUTER_API_BASE"),
        VarSpec("SSH_USER"),
        VarSpec("SSH_HOST"),
        VarSpec("SHODAN_API_KEY", secret=True),
        VarSpec("PROMPT_TOOLKIT_NO_CPR"),
    ]


CATALOG: dict[str, VarSpec] = {spec.name: spec for spec in _specs()}

_ALLOWED_MEMORY_MODES = {"episodic", "semantic", "all"}


def parse_dotenv(path: str | Path) -> dict[str, str]:
    """Parse a KEY=VALUE dotenv file. Comments allowed, no interpolation."""
    values: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected KEY=VALUE, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        values[key] = value
    return values


@dataclass
class EnvConfig:
    """An immutable-by-convention snapshot of effective configuration.

    `values` hold parsed entries for catalog keys; `extra` holds unknown
    dotenv keys passed through verbatim to tool subprocess environments.
    """

    values: dict[str, Any] = field(default_factory=dict)
    sources: dict[str, str] = field(default_factory=dict)
    extra: dict[str, str] = field(default_factory=dict)

    def get(self, key: str, default: Any = None) -> Any:
        if key in self.values:
            return self.values[key]
        if key in self.extra:
            return self.extra[key]
        return default

    def is_set(self, key: str) -> bool:
        return self.values.get(key) is not None or key in self.extra

    def with_override(self, key: str, raw_value: str) -> "EnvConfig":
        """Return a new snapshot with one session override applied."""
        parsed = _parse_value(key, raw_value)
        values = dict(self.values)
        sources = dict(self.sources)
        values[key] = parsed
        sources[key] = "session"
        return EnvConfig(values=values, sources=sources, extra=dict(self.extra))

    def describe(self) -> list[tuple[str, str, str]]:
        """(key, rendered value, source) rows for every catalog key.

        Secrets are redacted; this is the /config list view.
        """
        rows = []
        for name, spec in sorted(CATALOG.items()):
            value = self.values.get(name)
            if value is None:
                rendered = ""
            elif spec.secret:
                rendered = REDACTION_MARKER
            else:
                rendered = str(value)
            rows.append((name, rendered, self.sources.get(name, "default")))
        return rows


def _parse_value(key: str, raw: str) -> Any:
    spec = CATALOG.get(key)
    if spec is None:
        return raw
    try:
        return spec.parser(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def load_config(
    dotenv_path: str | Path | None = None,
    environ: dict[str, str] | None = None,
) -> EnvConfig:
    """Resolve the effective configuration snapshot.

    Precedence: process environment > dotenv file > built-in defaults.
    A blank OPENAI_API_KEY is a startup error; it must hold the "sk-123"
    placeholder or a real key.
    """
    environ = os.environ if environ is None else environ
    dotenv: dict[str, str] = {}
    if dotenv_path is not None and Path(dotenv_path).exists():
        dotenv = parse_dotenv(dotenv_path)

    values: dict[str, Any] = {}
    sources: dict[str, str] = {}
    for name, spec in CATALOG.items():
        if name in environ:
            raw, source = environ[name], "env"
        elif name in dotenv:
            raw, source = dotenv[name], "dotenv"
        else:
            values[name] = spec.default
            sources[name] = "default"
            continue
        if name == "OPENAI_API_KEY" and raw.strip() == "":
            raise ConfigError(
                "OPENAI_API_KEY must not be left blank: set the 'sk-123' "
                "placeholder or an actual API key"
            )
        if raw == "" and spec.parser is not str:
            # Empty assignment of a typed variable means "unset".
            values[name] = spec.default
            sources[name] = "default"
            continue
        values[name] = _parse_value(name, raw)
        sources[name] = source

    memory_mode = values.get("CAI_MEMORY")
    if memory_mode is not None and memory_mode not in _ALLOWED_MEMORY_MODES:
        raise ConfigError(
            f"CAI_MEMORY: expected one of {sorted(_ALLOWED_MEMORY_MODES)}, "
            f"got {memory_mode!r}"
        )

    extra = {k: v for k, v in dotenv.items() if k not in CATALOG}
    return EnvConfig(values=values, sources=sources, extra=extra)


class ConfigSession:
    """Mutable /config view over an immutable base snapshot."""

    def __init__(self, base: EnvConfig):
        self._snapshot = base

    @property
    def snapshot(self) -> EnvConfig:
        return self._snapshot

    def set(self, key: str, raw_value: str) -> None:
        if key not in CATALOG:
            raise ConfigError(f"unknown configuration key: {key}")
        self._snapshot = self._snapshot.with_override(key, raw_value)

    def get(self, key: str) -> Any:
        if key not in CATALOG:
            raise ConfigError(f"unknown configuration key: {key}")
        return self._snapshot.get(key)

    def list(self) -> list[tuple[str, str, str]]:
        return self._snapshot.describe()
