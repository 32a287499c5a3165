"""Code execution: write a permanent source file into the workspace, run it."""

from __future__ import annotations

import subprocess
from dataclasses import dataclass
from pathlib import Path

from .registry import ToolError, ToolOutput, truncate_output

DEFAULT_FILENAME = "exploit"
DEFAULT_TIMEOUT_SECONDS = 100.0


@dataclass(frozen=True)
class _Runner:
    extension: str
    run: tuple[str, ...] = ()       # interpreter argv prefix
    compile: tuple[str, ...] = ()   # compiler argv prefix; binary appended


# Fixed language dispatch table; compiled languages build into the
# workspace then execute the binary.
LANGUAGES: dict[str, _Runner] = {
    "py": _Runner("py", run=("python3",)),
    "php": _Runner("php", run=("php",)),
    "sh": _Runner("sh", run=("sh",)),
    "rb": _Runner("rb", run=("ruby",)),
    "pl": _Runner("pl", run=("perl",)),
    "go": _Runner("go", run=("go", "run")),
    "js": _Runner("js", run=("node",)),
    "ts": _Runner("ts", run=("ts-node",)),
    "rs": _Runner("rs", compile=("rustc", "-o")),
    "cs": _Runner("cs", run=("dotnet", "script")),
    "java": _Runner("java", run=("java",)),
    "kt": _Runner("kt", compile=("kotlinc", "-include-runtime", "-d")),
    "c": _Runner("c", compile=("cc", "-o")),
    "cpp": _Runner("cpp", compile=("c++", "-o")),
}


def execute_code(
    code: str,
    language: str = "py",
    filename: str = DEFAULT_FILENAME,
    timeout: float = DEFAULT_TIMEOUT_SECONDS,
    workspace: str | Path = ".",
) -> ToolOutput:
    """Persist `code` as {filename}.{ext} in the workspace and execute it.

    The source file survives the call so later shell commands can re-run
    or inspect it.
    """
    if not code.strip():
        raise ToolError("no code provided")
    runner = LANGUAGES.get(language)
    if runner is None:
        raise ToolError(
            f"unknown language {language!r}; supported: {', '.join(sorted(LANGUAGES))}"
        )
    workspace = Path(workspace)
    workspace.mkdir(parents=True, exist_ok=True)
    source = workspace / f"{filename}.{runner.extension}"
    source.write_text(code)

    if runner.compile:
        binary = workspace / f"{filename}.bin"
        argv = [*runner.compile, str(binary), str(source)]
        compile_result = _run(argv, timeout, workspace)
        if compile_result.exit_status != 0:
            return compile_result
        return _run([str(binary)], timeout, workspace)
    return _run([*runner.run, str(source)], timeout, workspace)


def _run(argv: list[str], timeout: float, cwd: Path) -> ToolOutput:
    try:
        proc = subprocess.run(argv, capture_output=True, timeout=timeout, cwd=cwd)
    except subprocess.TimeoutExpired as exc:
        partial = (exc.stdout or b"").decode("utf-8", errors="replace")
        output = truncate_output(partial + f"\n[timeout after {timeout}s]")
        output.exit_status = -1
        return output
    except FileNotFoundError:
        raise ToolError(f"tool unavailable: {argv[0]} not found on host") from None
    text = proc.stdout.decode("utf-8", errors="replace") + proc.stderr.decode(
        "utf-8", errors="replace"
    )
    output = truncate_output(text)
    output.exit_status = proc.returncode
    return output
