"""Python snippet execution in an isolated child process."""

from __future__ import annotations

import logging
import shutil
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from ..interfaces import InterfaceResult

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_SECONDS = 5.0
DEFAULT_OUTPUT_CAP_BYTES = 4096
ERROR_PREFIX = "Error from code executor: "

# Runs inside the child. Mirrors notebook semantics: if the snippet ends with a
# bare expression, its value is printed after the rest executes.
_RUNNER = r"""
import ast, sys

src = open(sys.argv[1], encoding="utf-8").read()
try:
    tree = ast.parse(src)
except SyntaxError as exc:
    print(f"SyntaxError: {exc.msg}", file=sys.stderr)
    raise SystemExit(1)

last_expr = None
if tree.body and isinstance(tree.body[-1], ast.Expr):
    last_expr = ast.Expression(tree.body[-1].value)
    tree.body = tree.body[:-1]

scope = {"__name__": "__main__"}
try:
    exec(compile(tree, "<snippet>", "exec"), scope)
    if last_expr is not None:
        value = eval(compile(last_expr, "<snippet>", "eval"), scope)
        if value is not None:
            print(value)
except BaseException as exc:
    print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
    raise SystemExit(1)
"""


@dataclass
class ExecutionOutcome:
    stdout: str
    error: Optional[str]
    timed_out: bool
    wall_time: float

    def __post_init__(self) -> None:
        if self.timed_out and not self.error:
            raise ValueError("timed_out outcome must carry an error")


def _rlimit_preexec(timeout: float):
    import resource

    def apply() -> None:
        cpu = int(timeout) + 1
        resource.setrlimit(resource.RLIMIT_CPU, (cpu, cpu + 1))
        resource.setrlimit(resource.RLIMIT_FSIZE, (16 << 20, 16 << 20))
        try:
            resource.setrlimit(resource.RLIMIT_AS, (1 << 30, 1 << 30))
        except (ValueError, OSError):
            pass

    return apply


def _error_message(stderr: str) -> str:
    """Last non-empty stderr line, with a leading exception-class prefix dropped."""
    lines = [ln.strip() for ln in stderr.splitlines() if ln.strip()]
    if not lines:
        return "execution failed"
    last = lines[-1]
    head, sep, rest = last.partition(": ")
    if sep and rest and head.replace(".", "").isidentifier():
        return rest
    return last


class CodeExecutor:
    """Runs snippets under a wall-clock timeout with capped captured output.

    Each run gets a fresh temp working directory; the child is started with
    "-I" (isolated mode), a stripped environment, and rlimits on CPU, file
    size, and address space. A worker semaphore bounds concurrency.
    """

    def __init__(
        self,
        interpreter: Optional[Sequence[str]] = None,
        timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS,
        output_cap_bytes: int = DEFAULT_OUTPUT_CAP_BYTES,
        workers: int = 2,
    ) -> None:
        self.interpreter = list(interpreter) if interpreter else [sys.executable]
        if shutil.which(self.interpreter[0]) is None and not Path(self.interpreter[0]).exists():
            raise RuntimeError(f"interpreter not found: {self.interpreter[0]}")
        if workers < 1:
            raise ValueError("worker pool size must be >= 1")
        self.timeout_seconds = timeout_seconds
        self.output_cap_bytes = output_cap_bytes
        self._slots = threading.Semaphore(workers)

    def run(self, snippet: str) -> ExecutionOutcome:
        started = time.monotonic()
        with self._slots, tempfile.TemporaryDirectory(prefix="codeexec-") as workdir:
            runner = Path(workdir) / "_runner.py"
            runner.write_text(_RUNNER, encoding="utf-8")
            code_file = Path(workdir) / "snippet.py"
            code_file.write_text(snippet, encoding="utf-8")
            cmd = [*self.interpreter, "-I", str(runner), str(code_file)]
            env = {"PATH": "/usr/bin:/bin", "LC_ALL": "C.UTF-8", "HOME": workdir}
            try:
                proc = subprocess.run(
                    cmd,
                    cwd=workdir,
                    env=env,
                    capture_output=True,
                    timeout=self.timeout_seconds,
                    preexec_fn=_rlimit_preexec(self.timeout_seconds),
                )
            except subprocess.TimeoutExpired as exc:
                wall = time.monotonic() - started
                partial = (exc.stdout or b"")[: self.output_cap_bytes]
                return ExecutionOutcome(
                    stdout=partial.decode("utf-8", "replace"),
                    error=f"execution timed out after {self.timeout_seconds:g} seconds",
                    timed_out=True,
                    wall_time=wall,
                )
        wall = time.monotonic() - started
        stdout = proc.stdout[: self.output_cap_bytes].decode("utf-8", "replace")
        if proc.returncode != 0:
            stderr = proc.stderr[: self.output_cap_bytes].decode("utf-8", "replace")
            return ExecutionOutcome(
                stdout=stdout, error=_error_message(stderr), timed_out=False, wall_time=wall
            )
        return ExecutionOutcome(stdout=stdout, error=None, timed_out=False, wall_time=wall)

    def __call__(self, query: str) -> InterfaceResult:
        if not query.strip():
            return InterfaceResult(body=ERROR_PREFIX + "empty code snippet", is_error=True)
        outcome = self.run(query)
        if outcome.error is not None:
            return InterfaceResult(body=ERROR_PREFIX + outcome.error, is_error=True)
        return InterfaceResult(body=outcome.stdout.strip())
