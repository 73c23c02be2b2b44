"""Pluggable text-generation backend and candidate extraction.

The wire contract is one POST of {prompt, max_tokens, temperature, seed,
stop[]} answered with {"text": ...}. A stub backend replays canned
completions (matched by instruction digest or by substring) so the whole
pipeline runs hermetically and byte-reproducibly. Every request/response
pair is logged with digests for replay.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from exbt.errors import (
    BackendTimeout,
    BackendUnavailable,
    MalformedResponse,
)
from exbt.jmodel import parse_unit

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenerationParams:
    max_new_tokens: int = 512
    temperature: float = 0.0
    seed: int = 0
    stop: tuple[str, ...] = ()


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RequestLog:
    entries: list[dict] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, instruction: str, params: GenerationParams, completion: str, backend: str):
        with self._lock:
            self.entries.append(
                {
                    "n": len(self.entries),
                    "backend": backend,
                    "instruction_digest": digest(instruction),
                    "params": {
                        "max_new_tokens": params.max_new_tokens,
                        "temperature": params.temperature,
                        "seed": params.seed,
                        "stop": list(params.stop),
                    },
                    "completion_digest": digest(completion),
                }
            )

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for e in self.entries:
                f.write(json.dumps(e, sort_keys=True) + "\n")


class StubBackend:
    """Deterministic canned backend for hermetic runs.

    Canned entries match by exact instruction digest ('digest') or by
    substring ('contains'); first match wins, in file order. A 'default'
    entry (no matcher) answers anything else.
    """

    kind = "stub"

    def __init__(self, canned: list[dict] | None = None, log: RequestLog | None = None):
        self.canned = canned or []
        self.log = log

    @classmethod
    def from_file(cls, path, log: RequestLog | None = None) -> "StubBackend":
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        if isinstance(data, dict):
            data = data.get("completions", [])
        return cls(data, log)

    def generate(self, instruction: str, params: GenerationParams) -> str:
        inst_digest = digest(instruction)
        completion = None
        for entry in self.canned:
            if "digest" in entry and entry["digest"] == inst_digest:
                completion = entry["completion"]
                break
            if "contains" in entry and entry["contains"] in instruction:
                completion = entry["completion"]
                break
            if "digest" not in entry and "contains" not in entry:
                completion = entry["completion"]
                break
        if completion is None:
            raise BackendUnavailable(
                f"stub has no completion for instruction {inst_digest[:12]}"
            )
        if self.log is not None:
            self.log.record(instruction, params, completion, self.kind)
        return completion


class HttpBackend:
    """Minimal HTTP adapter for hosted or local generation servers."""

    kind = "http"

    def __init__(
        self,
        url: str,
        auth_token: str | None = None,
        timeout: float = 60.0,
        log: RequestLog | None = None,
    ):
        if not url:
            raise BackendUnavailable("BACKEND_URL is not configured")
        self.url = url
        self.auth_token = auth_token
        self.timeout = timeout
        self.log = log

    def generate(self, instruction: str, params: GenerationParams) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        payload = {
            "prompt": instruction,
            "max_tokens": params.max_new_tokens,
            "temperature": params.temperature,
            "seed": params.seed,
            "stop": list(params.stop),
        }
        try:
            resp = requests.post(
                self.url, json=payload, headers=headers, timeout=self.timeout
            )
        except requests.Timeout as exc:
            raise BackendTimeout(
                f"no answer within {self.timeout}s", elapsed=self.timeout
            ) from exc
        except requests.RequestException as exc:
            raise BackendUnavailable(str(exc)) from exc
        try:
            data = resp.json()
        except ValueError as exc:
            raise MalformedResponse(
                f"non-JSON response (status {resp.status_code})"
            ) from exc
        text = _extract_text_field(data)
        if text is None:
            raise MalformedResponse(f"no text field in response keys {sorted(data)}")
        if self.log is not None:
            self.log.record(instruction, params, text, self.kind)
        return text


def _extract_text_field(data) -> str | None:
    """Map common provider response shapes onto the plain text contract."""
    if not isinstance(data, dict):
        return None
    if isinstance(data.get("text"), str):
        return data["text"]
    choices = data.get("choices")
    if isinstance(choices, list) and choices:
        first = choices[0]
        if isinstance(first, dict):
            if isinstance(first.get("text"), str):
                return first["text"]
            msg = first.get("message")
            if isinstance(msg, dict) and isinstance(msg.get("content"), str):
                return msg["content"]
    if isinstance(data.get("completion"), str):
        return data["completion"]
    return None


def generate_many(
    backend,
    instructions: list[str],
    params: GenerationParams,
    max_in_flight: int = 4,
    log: RequestLog | None = None,
) -> list[str]:
    """Run many generations with bounded in-flight concurrency.

    Completions come back in input order and are logged in input order
    after all requests finish, so replay logs stay deterministic.
    """
    if not instructions:
        return []
    workers = max(1, min(max_in_flight, len(instructions)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(backend.generate, inst, params) for inst in instructions]
        completions = [f.result() for f in futures]
    if log is not None:
        for inst, completion in zip(instructions, completions):
            log.record(inst, params, completion, getattr(backend, "kind", "?"))
    return completions


def make_backend(
    kind: str | None = None,
    url: str | None = None,
    stub_file=None,
    log: RequestLog | None = None,
):
    """Factory honoring BACKEND_KIND / BACKEND_URL / BACKEND_AUTH_TOKEN."""
    kind = kind or os.environ.get("BACKEND_KIND", "stub")
    if kind == "stub":
        if stub_file:
            return StubBackend.from_file(stub_file, log)
        return StubBackend([], log)
    if kind == "http":
        return HttpBackend(
            url or os.environ.get("BACKEND_URL", ""),
            auth_token=os.environ.get("BACKEND_AUTH_TOKEN"),
            log=log,
        )
    raise BackendUnavailable(f"unknown backend kind {kind!r}")


# --- candidate extraction ---

_FENCE = "```"


def _fenced_blocks(completion: str) -> list[str]:
    blocks = []
    parts = completion.split(_FENCE)
    # odd indexes are inside fences
    for k in range(1, len(parts), 2):
        body = parts[k]
        # drop a language tag on the first line
        if "\n" in body:
            first, rest = body.split("\n", 1)
            if first.strip().isalpha() or first.strip() == "":
                body = rest
        blocks.append(body)
    return blocks


def _balanced_method_at(text: str, start: int) -> str | None:
    """From an annotation start, the full method text with balanced braces."""
    open_idx = text.find("{", start)
    if open_idx < 0:
        return None
    sig = text[start:open_idx]
    if "(" not in sig or ")" not in sig:
        return None
    depth = 0
    i = open_idx
    in_str: str | None = None
    while i < len(text):
        c = text[i]
        if in_str:
            if c == "\\":
                i += 2
                continue
            if c == in_str:
                in_str = None
        elif c in ("\"", "'"):
            in_str = c
        elif c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1].strip()
        i += 1
    return None


def _reparses_as_test_method(source: str) -> bool:
    try:
        unit = parse_unit("class __C {\n" + source + "\n}", "<candidate>")
    except Exception:
        return False
    from exbt.classifier import _has_test_annotation

    for _, m in ((t, m) for t in unit.all_types() for m in t.methods):
        if m.tok_open is not None and _has_test_annotation(m):
            return True
    return False


def extract_candidate(completion: str) -> str | None:
    """First complete test-annotated method in a completion, or None.

    Code fences and surrounding prose are stripped; the extracted method
    must re-parse (balanced braces, test annotation present).
    """
    chunks = _fenced_blocks(completion) or [completion]
    for chunk in chunks:
        pos = 0
        while True:
            at = chunk.find("@Test", pos)
            if at < 0:
                break
            candidate = _balanced_method_at(chunk, at)
            if candidate and _reparses_as_test_method(candidate):
                return candidate
            pos = at + 1
    return None
