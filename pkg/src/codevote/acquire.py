"""Candidate acquisition: JSONL task files, on-disk pools, and remote providers.

Offline loading is the default posture; the provider client exists for users
who want to populate a pool from live chat-completion endpoints and then work
offline from the stored files.
"""

from __future__ import annotations

import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import httpx

from .model import Candidate, Task

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.2
DEFAULT_MAX_TOKENS = 1024
REQUEST_TIMEOUT_S = 60.0

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)(?:```|\Z)", re.DOTALL)


class TaskFileError(ValueError):
    """A task file line is malformed; the message names the line."""


class FetchError(Exception):
    """Every configured provider failed to produce a candidate."""


@dataclass(frozen=True)
class ProviderSpec:
    """One chat-completion endpoint. The API key is read from the named
    environment variable, never stored in config values."""

    name: str
    endpoint_url: str
    model: str
    api_key_env: str
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("provider name must be non-empty")
        if not self.endpoint_url.startswith(("http://", "https://")):
            raise ValueError(f"endpoint_url {self.endpoint_url!r} is not a valid URL")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ProviderSpec":
        return cls(
            name=data["name"],
            endpoint_url=data["endpoint_url"],
            model=data["model"],
            api_key_env=data["api_key_env"],
            temperature=float(data.get("temperature", DEFAULT_TEMPERATURE)),
            max_tokens=int(data.get("max_tokens", DEFAULT_MAX_TOKENS)),
        )


def load_tasks(path: Path) -> list[Task]:
    """One task per JSONL line, in file order. Unknown fields are ignored."""
    path = Path(path)
    tasks: list[Task] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TaskFileError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            try:
                task = Task(
                    id=obj["task_id"],
                    prompt=obj["prompt"],
                    entry_point=obj["entry_point"],
                    reference_tests=obj.get("test", ""),
                    subject_language=obj.get("subject_language", "python"),
                    input_constraints=tuple(obj.get("input_constraints", ())),
                )
            except (KeyError, TypeError, ValueError) as exc:
                missing = exc.args[0] if isinstance(exc, KeyError) else exc
                raise TaskFileError(f"{path}: line {lineno}: {missing}") from exc
            if task.id in seen:
                raise TaskFileError(f"{path}: line {lineno}: duplicate task_id {task.id!r}")
            seen.add(task.id)
            tasks.append(task)
    if not tasks:
        log.warning("%s: task file is empty", path)
    return tasks


def candidate_paths(root: Path, task: Task) -> dict[str, Path]:
    """Map source_id -> file for one task's pool.

    Pools live at ``<root>/<task_id>/<source_id>.<ext>``; pointing ``root``
    directly at a task's own directory also works.
    """
    root = Path(root)
    task_dir = root / task.id
    if not task_dir.is_dir():
        task_dir = root
    if not task_dir.is_dir():
        return {}
    out: dict[str, Path] = {}
    for entry in sorted(task_dir.iterdir()):
        if not entry.is_file():
            continue
        if entry.stem in out:
            log.warning("duplicate source id %r: keeping %s, ignoring %s",
                        entry.stem, out[entry.stem], entry)
            continue
        out[entry.stem] = entry
    return out


def load_candidates(root: Path, task: Task) -> list[Candidate]:
    """One candidate per pool file; empty files are skipped with a warning."""
    pool: list[Candidate] = []
    for source_id, path in candidate_paths(root, task).items():
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise OSError(f"unreadable candidate file {path}: {exc}") from exc
        if not text.strip():
            log.warning("skipping empty candidate file %s", path)
            continue
        pool.append(
            Candidate(id=source_id, task_id=task.id, source_id=source_id, text=text)
        )
    return pool


def store_candidates(root: Path, candidates: Sequence[Candidate]) -> list[Path]:
    """Write candidates as ``<root>/<task_id>/<source_id>.py`` for offline reuse."""
    written: list[Path] = []
    for candidate in candidates:
        target = Path(root) / candidate.task_id / f"{candidate.source_id}.py"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(candidate.text, encoding="utf-8")
        written.append(target)
    return written


def extract_code(response_text: str) -> str:
    """First fenced code block if any, otherwise the whole text trimmed."""
    if not response_text.strip():
        raise ValueError("response contains no code")
    match = _FENCE_RE.search(response_text)
    if match:
        block = match.group(1).strip("\n").rstrip()
        if block.strip():
            return block
    return response_text.strip()


def _chat_request(provider: ProviderSpec, prompt: str, api_key: str) -> str:
    """POST one chat-completion request and return the first choice's content."""
    body = {
        "model": provider.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": provider.temperature,
        "max_tokens": provider.max_tokens,
    }
    headers = {"Authorization": f"Bearer {api_key}"}
    attempts = 0
    while True:
        attempts += 1
        try:
            response = httpx.post(
                provider.endpoint_url, json=body, headers=headers, timeout=REQUEST_TIMEOUT_S
            )
        except httpx.TransportError as exc:
            if attempts < 2:  # one retry on transient network errors
                continue
            raise FetchError(f"{provider.name}: network error: {exc}") from exc
        if response.status_code >= 500 and attempts < 2:
            continue
        if response.status_code != 200:
            raise FetchError(f"{provider.name}: HTTP {response.status_code}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise FetchError(f"{provider.name}: malformed completion response") from exc


def fetch_candidates(
    task: Task, providers: Sequence[ProviderSpec]
) -> tuple[list[Candidate], list[dict]]:
    """Query each provider once with the task prompt.

    Returns the candidates plus an error record per failed provider; raises
    :class:`FetchError` only when every provider fails. Results are merged by
    sorted source id, independent of provider order or response timing.
    """
    if not providers:
        raise ValueError("provider list must be non-empty")
    names = [p.name for p in providers]
    if len(set(names)) != len(names):
        raise ValueError("provider names must be unique")

    def fetch_one(provider: ProviderSpec) -> Candidate:
        api_key = os.environ.get(provider.api_key_env, "")
        if not api_key:
            raise FetchError(f"{provider.name}: {provider.api_key_env} is unset or empty")
        content = _chat_request(provider, task.prompt, api_key)
        return Candidate(
            id=provider.name,
            task_id=task.id,
            source_id=provider.name,
            text=extract_code(content),
        )

    candidates: list[Candidate] = []
    errors: list[dict] = []
    with ThreadPoolExecutor(max_workers=min(8, len(providers))) as pool:
        futures = {p.name: pool.submit(fetch_one, p) for p in providers}
        for name in sorted(futures):
            try:
                candidates.append(futures[name].result())
            except Exception as exc:
                log.warning("provider %s failed: %s", name, exc)
                errors.append({"provider": name, "error": str(exc)})
    if not candidates:
        raise FetchError(f"all {len(providers)} providers failed for task {task.id!r}")
    return candidates, errors
