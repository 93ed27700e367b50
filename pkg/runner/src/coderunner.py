#!/usr/bin/env python3
"""Sandboxed executor for one untrusted candidate program.

Speaks one JSON object per line over stdin/stdout; diagnostics go to stderr.
Requests carry an ``op`` (ping, load, call, run_tests) and an ``id`` that is
echoed in the response. Requests are answered strictly in order, one response
per request.

The sandbox strips file, process, and network primitives from the loaded
namespace and whitelists imports. That is accident protection for generated
code, not a security boundary. Wall-clock timeouts are the parent's job: a
parent that stops hearing from this process kills and respawns it.
"""

from __future__ import annotations

import builtins
import io
import json
import sys

RECURSION_LIMIT = 2000

ALLOWED_MODULES = {
    "array",
    "bisect",
    "cmath",
    "collections",
    "copy",
    "datetime",
    "decimal",
    "fractions",
    "functools",
    "heapq",
    "itertools",
    "json",
    "math",
    "numbers",
    "operator",
    "random",
    "re",
    "statistics",
    "string",
    "typing",
    "unicodedata",
}

BLOCKED_BUILTINS = {
    "open",
    "input",
    "breakpoint",
    "exit",
    "quit",
    "help",
    "license",
    "credits",
    "copyright",
}


def _guarded_import(name, globals=None, locals=None, fromlist=(), level=0):
    root = name.split(".")[0]
    if root not in ALLOWED_MODULES:
        raise ImportError(f"import of {name!r} is not allowed in the sandbox")
    return __import__(name, globals, locals, fromlist, level)


def _restricted_builtins() -> dict:
    table = {
        key: value
        for key, value in vars(builtins).items()
        if key not in BLOCKED_BUILTINS
    }
    table["__import__"] = _guarded_import
    return table


def encode_value(value, depth=0):
    """JSON-safe deep encoding; non-encodable values become tagged strings."""
    if depth > 20:
        return {"__kind__": "depth", "repr": "..."}
    if value is None:
        return None
    if isinstance(value, bool):
        return bool(value)
    if isinstance(value, int):
        return int(value)
    if isinstance(value, float):
        return float(value)
    if isinstance(value, str):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [encode_value(v, depth + 1) for v in value]
    if isinstance(value, dict):
        try:
            return {str(k): encode_value(v, depth + 1) for k, v in value.items()}
        except Exception:
            return {"__kind__": "dict", "repr": repr(value)}
    if isinstance(value, (set, frozenset)):
        try:
            items = sorted(repr(v) for v in value)
        except Exception:
            items = [repr(value)]
        return {"__kind__": "set", "items": items}
    return {"__kind__": type(value).__name__, "repr": repr(value)}


class Session:
    """Holds the namespace of the currently loaded candidate."""

    def __init__(self) -> None:
        self.namespace: dict | None = None

    def reset(self) -> None:
        self.namespace = None

    def load(self, source: str) -> dict:
        namespace = {
            "__builtins__": _restricted_builtins(),
            "__name__": "candidate",
        }
        try:
            code = compile(source, "<candidate>", "exec")
        except (SyntaxError, ValueError) as exc:
            self.reset()
            return {"ok": False, "error": f"compile error: {exc}"}
        try:
            exec(code, namespace)
        except BaseException as exc:  # candidate code may raise anything
            self.reset()
            return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
        self.namespace = namespace
        return {"ok": True}

    def call(self, entry_point: str, args: list) -> dict:
        if self.namespace is None:
            return {"ok": False, "error": "protocol: call before successful load"}
        fn = self.namespace.get(entry_point)
        if not callable(fn):
            return {"outcome": {"status": "exception", "error_kind": "NameError"}}
        try:
            result = fn(*args)
        except BaseException as exc:
            return {"outcome": {"status": "exception", "error_kind": type(exc).__name__}}
        try:
            value = encode_value(result)
        except BaseException:
            value = {"__kind__": type(result).__name__, "repr": "<unrepresentable>"}
        return {"outcome": {"status": "ok", "value": value}}

    def run_tests(self, tests: str) -> dict:
        if self.namespace is None:
            return {"ok": False, "error": "protocol: run_tests before successful load"}
        try:
            code = compile(tests, "<tests>", "exec")
        except (SyntaxError, ValueError) as exc:
            return {"ok": False, "error": f"protocol: tests do not compile: {exc}"}
        try:
            exec(code, self.namespace)
        except AssertionError:
            return {"passed": False, "failures": 1}
        except BaseException as exc:
            print(f"test run aborted: {type(exc).__name__}: {exc}", file=sys.stderr)
            return {"passed": False, "failures": 1}
        return {"passed": True, "failures": 0}


def handle(session: Session, request: dict) -> dict:
    op = request.get("op")
    if op == "ping":
        return {"ok": True}
    if op == "load":
        if not isinstance(request.get("source"), str):
            session.reset()
            return {"ok": False, "error": "protocol: load needs a string 'source'"}
        return session.load(request["source"])
    if op == "call":
        if not isinstance(request.get("entry_point"), str) or not isinstance(
            request.get("args"), list
        ):
            session.reset()
            return {"ok": False, "error": "protocol: call needs 'entry_point' and 'args'"}
        return session.call(request["entry_point"], request["args"])
    if op == "run_tests":
        if not isinstance(request.get("tests"), str):
            session.reset()
            return {"ok": False, "error": "protocol: run_tests needs a string 'tests'"}
        return session.run_tests(request["tests"])
    session.reset()
    return {"ok": False, "error": f"protocol: unknown op {op!r}"}


def main() -> int:
    sys.setrecursionlimit(RECURSION_LIMIT)
    proto_out = sys.stdout
    proto_in = sys.stdin
    # anything the candidate prints must not corrupt the protocol stream
    sys.stdout = sys.stderr
    sys.stdin = io.StringIO()

    session = Session()
    for line in proto_in:
        if not line.strip():
            continue
        request_id = None
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
            request_id = request.get("id")
            response = handle(session, request)
        except ValueError as exc:
            session.reset()
            response = {"ok": False, "error": f"protocol: malformed request: {exc}"}
        response["id"] = request_id
        proto_out.write(json.dumps(response) + "\n")
        proto_out.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
