"""Client side of the sandbox runner protocol (one JSON object per line).

Each :class:`RunnerProcess` owns exactly one executor process holding one
loaded candidate. The parent enforces wall-clock timeouts: an expired call
kills the process, the caller then respawns and reloads before continuing.
"""

from __future__ import annotations

import importlib.util
import json
import os
import select
import shlex
import shutil
import subprocess
import sys
import time

from .model import EnsembleConfig, ExecOutcome

RUNNER_ENV_VAR = "CODEVOTE_RUNNER"
RUNNER_EXECUTABLE = "coderunner"
RUNNER_MODULE = "coderunner"

# extra grace on top of the subject timeout before declaring the process hung;
# kept small so a hung call is reported within timeout + 500 ms
_PROTOCOL_GRACE_S = 0.25


class RunnerUnavailable(Exception):
    """No runner command could be resolved; execution features are disabled."""


class RunnerError(Exception):
    """Infrastructure failure of a runner process (distinct from subject behavior)."""


def resolve_runner_cmd(config: EnsembleConfig) -> list[str]:
    """Resolve the executor command: config, then env, then PATH, then module."""
    if config.runner_cmd:
        return shlex.split(config.runner_cmd)
    env_cmd = os.environ.get(RUNNER_ENV_VAR)
    if env_cmd:
        return shlex.split(env_cmd)
    on_path = shutil.which(RUNNER_EXECUTABLE)
    if on_path:
        return [on_path]
    if importlib.util.find_spec(RUNNER_MODULE) is not None:
        return [sys.executable, "-m", RUNNER_MODULE]
    raise RunnerUnavailable(
        "no sandbox runner found: set runner_cmd in the config, export "
        f"{RUNNER_ENV_VAR}, or install the runner package"
    )


class RunnerProcess:
    """One executor process speaking line-delimited JSON over stdio."""

    def __init__(self, cmd: list[str]):
        self.cmd = list(cmd)
        self._proc: subprocess.Popen | None = None
        self._buffer = b""
        self._next_id = 0
        self._loaded_source: str | None = None
        self._spawn()

    def _spawn(self) -> None:
        try:
            self._proc = subprocess.Popen(
                self.cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            raise RunnerError(f"failed to launch runner {self.cmd!r}: {exc}") from exc
        self._buffer = b""

    @property
    def alive(self) -> bool:
        return self._proc is not None and self._proc.poll() is None

    def _read_line(self, deadline: float) -> bytes | None:
        """One protocol line, or None if the deadline passes first."""
        assert self._proc is not None and self._proc.stdout is not None
        stdout = self._proc.stdout
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            ready, _, _ = select.select([stdout], [], [], remaining)
            if not ready:
                return None
            chunk = os.read(stdout.fileno(), 65536)
            if not chunk:
                raise RunnerError("runner closed its output stream")
            self._buffer += chunk
        line, _, self._buffer = self._buffer.partition(b"\n")
        return line

    def _request(self, payload: dict, timeout_s: float) -> dict | None:
        """Send one request; None means the deadline expired (process killed)."""
        if not self.alive:
            raise RunnerError("runner process is not running")
        assert self._proc is not None and self._proc.stdin is not None
        self._next_id += 1
        payload = dict(payload, id=self._next_id)
        try:
            self._proc.stdin.write((json.dumps(payload) + "\n").encode("utf-8"))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise RunnerError(f"runner rejected request: {exc}") from exc
        line = self._read_line(time.monotonic() + timeout_s)
        if line is None:
            self.kill()
            return None
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RunnerError(f"runner sent a non-JSON response: {line[:200]!r}") from exc
        if response.get("id") != self._next_id:
            raise RunnerError(
                f"response id {response.get('id')!r} does not match request {self._next_id}"
            )
        return response

    def ping(self, timeout_s: float = 5.0) -> bool:
        response = self._request({"op": "ping"}, timeout_s)
        return bool(response and response.get("ok"))

    def load(self, source: str, timeout_s: float = 30.0) -> tuple[bool, str | None]:
        """Compile and run the source at module scope inside the sandbox."""
        response = self._request({"op": "load", "source": source}, timeout_s)
        if response is None:
            return False, "timeout while loading source"
        if response.get("ok"):
            self._loaded_source = source
            return True, None
        return False, str(response.get("error", "load failed"))

    def call(self, entry_point: str, args: list, timeout_ms: int) -> ExecOutcome:
        """Invoke the entry point; a deadline miss kills the process."""
        response = self._request(
            {"op": "call", "entry_point": entry_point, "args": args},
            timeout_ms / 1000.0 + _PROTOCOL_GRACE_S,
        )
        if response is None:
            return ExecOutcome(status=ExecOutcome.TIMEOUT)
        if "outcome" not in response:
            raise RunnerError(f"malformed call response: {response!r}")
        return ExecOutcome.from_dict(response["outcome"])

    def run_tests(self, tests: str, timeout_ms: int) -> tuple[bool, int]:
        """Execute a test program in the loaded namespace."""
        response = self._request(
            {"op": "run_tests", "tests": tests}, timeout_ms / 1000.0 + _PROTOCOL_GRACE_S
        )
        if response is None:
            return False, 1  # timeout counts as a failing run
        if response.get("ok") is False:
            raise RunnerError(f"runner rejected test program: {response.get('error')!r}")
        return bool(response["passed"]), int(response["failures"])

    def restart_and_reload(self) -> bool:
        """Respawn after a kill and reload the previously loaded source."""
        self.kill()
        self._spawn()
        if self._loaded_source is None:
            return True
        ok, _ = self.load(self._loaded_source)
        return ok

    def kill(self) -> None:
        if self._proc is None:
            return
        if self._proc.poll() is None:
            self._proc.kill()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                pass
        for stream in (self._proc.stdin, self._proc.stdout):
            if stream is not None:
                try:
                    stream.close()
                except OSError:
                    pass

    def close(self) -> None:
        self.kill()
        self._proc = None

    def __enter__(self) -> "RunnerProcess":
        return self

    def __exit__(self, *_exc) -> None:
        self.close()
