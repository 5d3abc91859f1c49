"""Uniform client for chat-completion endpoints.

Three dialects share one interface: ``generic_chat`` speaks OpenAI-style
JSON over HTTPS (which the major providers expose via compatibility layers),
``mock`` serves canned responses keyed by prompt hash, and ``replay_dir``
reads previously recorded responses from disk.  A file-per-key response
cache makes reruns free and the whole harness usable offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from kgtextbench.textualize import approx_token_count

log = logging.getLogger(__name__)

DIALECTS = ("generic_chat", "mock", "replay_dir")
_RETRYABLE_STATUS = {408, 429, 500, 502, 503, 504}


class GatewayError(RuntimeError):
    """Completion failed after bounded retries."""


class AuthError(GatewayError):
    """Credentials rejected; the endpoint is unusable for this run."""


@dataclass(frozen=True)
class ModelEndpoint:
    """One chat endpoint plus its fixed request parameters."""

    model_id: str
    dialect: str = "generic_chat"
    base_url: str | None = None
    api_key_env: str | None = None
    temperature: float = 0.0
    max_output_tokens: int = 1024
    concurrency: int = 4
    timeout: float = 60.0
    max_retries: int = 4
    replay_dir: str | None = None

    def __post_init__(self) -> None:
        if self.dialect not in DIALECTS:
            raise ValueError(f"dialect must be one of {DIALECTS}, got {self.dialect!r}")
        if self.dialect == "generic_chat" and not self.base_url:
            raise ValueError(f"endpoint {self.model_id}: generic_chat requires base_url")
        if self.dialect == "replay_dir" and not self.replay_dir:
            raise ValueError(f"endpoint {self.model_id}: replay_dir requires a directory")

    def request_params(self) -> dict:
        return {
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
        }


@dataclass
class CompletionResult:
    text: str
    input_tokens: int
    output_tokens: int
    latency: float = 0.0
    cache_hit: bool = False
    retries: int = 0
    truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "latency": self.latency,
            "retries": self.retries,
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, d: dict, cache_hit: bool = False) -> "CompletionResult":
        return cls(
            text=d["text"],
            input_tokens=d["input_tokens"],
            output_tokens=d["output_tokens"],
            latency=d.get("latency", 0.0),
            cache_hit=cache_hit,
            retries=d.get("retries", 0),
            truncated=d.get("truncated", False),
        )


def request_key(endpoint: ModelEndpoint, prompt: str) -> str:
    """Stable digest of (model, request params, prompt)."""
    payload = json.dumps(
        {
            "model_id": endpoint.model_id,
            "params": endpoint.request_params(),
            "prompt": prompt,
        },
        sort_keys=True,
        ensure_ascii=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def prompt_sha(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class Gateway:
    """Dispatches completions with per-endpoint concurrency limits."""

    def __init__(self, sleep=time.sleep):
        self._sleep = sleep
        self._semaphores: dict[str, threading.Semaphore] = {}
        self._sem_lock = threading.Lock()
        self.mock_responses: dict[str, dict[str, str]] = {}
        self.mock_defaults: dict[str, str] = {}

    def install_mock_response(self, model_id: str, prompt: str, text: str) -> None:
        self.mock_responses.setdefault(model_id, {})[prompt_sha(prompt)] = text

    def install_mock_default(self, model_id: str, text: str) -> None:
        self.mock_defaults[model_id] = text

    def _semaphore(self, endpoint: ModelEndpoint) -> threading.Semaphore:
        with self._sem_lock:
            sem = self._semaphores.get(endpoint.model_id)
            if sem is None:
                sem = threading.Semaphore(endpoint.concurrency)
                self._semaphores[endpoint.model_id] = sem
            return sem

    # -- dialects ----------------------------------------------------------

    def _complete_mock(self, endpoint: ModelEndpoint, prompt: str) -> CompletionResult:
        canned = self.mock_responses.get(endpoint.model_id, {})
        text = canned.get(prompt_sha(prompt))
        if text is None:
            text = self.mock_defaults.get(endpoint.model_id)
        if text is None:
            raise GatewayError(f"mock endpoint {endpoint.model_id} has no response installed")
        return CompletionResult(
            text=text,
            input_tokens=approx_token_count(prompt),
            output_tokens=approx_token_count(text),
        )

    def _complete_replay(self, endpoint: ModelEndpoint, prompt: str) -> CompletionResult:
        path = Path(endpoint.replay_dir) / f"{request_key(endpoint, prompt)}.json"
        if not path.exists():
            raise GatewayError(f"no recorded response at {path}")
        entry = json.loads(path.read_text(encoding="utf-8"))
        return CompletionResult.from_dict(entry["response"])

    def _complete_http(self, endpoint: ModelEndpoint, prompt: str) -> CompletionResult:
        headers = {"Content-Type": "application/json"}
        if endpoint.api_key_env:
            key = os.environ.get(endpoint.api_key_env)
            if not key:
                raise AuthError(
                    f"environment variable {endpoint.api_key_env} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": endpoint.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": endpoint.temperature,
            "max_tokens": endpoint.max_output_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(endpoint.max_retries + 1):
            if attempt:
                self._sleep(min(0.5 * 2 ** (attempt - 1), 8.0))
            started = time.monotonic()
            try:
                resp = requests.post(
                    endpoint.base_url, json=payload, headers=headers, timeout=endpoint.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"{endpoint.model_id}: auth failure ({resp.status_code})")
            if resp.status_code in _RETRYABLE_STATUS:
                last_error = GatewayError(f"status {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise GatewayError(f"{endpoint.model_id}: status {resp.status_code}")
            try:
                data = resp.json()
                choice = data["choices"][0]
                text = choice["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise GatewayError(
                    f"{endpoint.model_id}: malformed response body ({exc!r})"
                ) from None
            usage = data.get("usage", {})
            return CompletionResult(
                text=text,
                input_tokens=usage.get("prompt_tokens", approx_token_count(prompt)),
                output_tokens=usage.get("completion_tokens", approx_token_count(text)),
                latency=time.monotonic() - started,
                retries=attempt,
                truncated=choice.get("finish_reason") == "length",
            )
        raise GatewayError(
            f"{endpoint.model_id}: retries exhausted ({last_error})"
        )

    # -- public API ----------------------------------------------------------

    def complete(self, endpoint: ModelEndpoint, prompt: str) -> CompletionResult:
        """One completion, honouring the endpoint's concurrency limit."""
        with self._semaphore(endpoint):
            if endpoint.dialect == "mock":
                return self._complete_mock(endpoint, prompt)
            if endpoint.dialect == "replay_dir":
                return self._complete_replay(endpoint, prompt)
            return self._complete_http(endpoint, prompt)

    def cached_complete(
        self, cache_dir: str | Path, endpoint: ModelEndpoint, prompt: str
    ) -> CompletionResult:
        """Completion through the file cache; hits skip the network entirely."""
        cache_dir = Path(cache_dir)
        key = request_key(endpoint, prompt)
        path = cache_dir / f"{key}.json"
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
            return CompletionResult.from_dict(entry["response"], cache_hit=True)
        except (FileNotFoundError, json.JSONDecodeError, KeyError):
            pass
        result = self.complete(endpoint, prompt)
        entry = {
            "request_digest": key,
            "model_id": endpoint.model_id,
            "params": endpoint.request_params(),
            "prompt_sha256": prompt_sha(prompt),
            "response": result.to_dict(),
            "stored_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        cache_dir.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".{os.getpid()}.{threading.get_ident()}.tmp")
        tmp.write_text(json.dumps(entry, sort_keys=True, ensure_ascii=True), encoding="utf-8")
        os.replace(tmp, path)
        return result
