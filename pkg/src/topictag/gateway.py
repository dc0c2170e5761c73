"""Chat-completion gateway with bounded concurrency and retries, plus a deterministic mock."""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import requests

from .prompting import RenderedPrompt

API_KEY_ENV = "TOPICTAG_API_KEY"
DEFAULT_MAX_RETRIES = 3
DEFAULT_BACKOFF = 0.5
DEFAULT_MAX_IN_FLIGHT = 4

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class GatewayError(RuntimeError):
    """Base class for completion failures."""


class AuthenticationError(GatewayError):
    """Credential rejected; never retried."""


class ProtocolError(GatewayError):
    """Non-retryable protocol problem (bad request, malformed response)."""


class RetryBudgetExceeded(GatewayError):
    """Transient failures outlasted the retry budget."""


@dataclass(frozen=True)
class GenerationParams:
    model_id: str
    temperature: float = 0.7
    top_p: float = 0.95
    max_tokens: int = 256
    stop: tuple[str, ...] = ()
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if not isinstance(self.stop, tuple):
            object.__setattr__(self, "stop", tuple(self.stop))


@dataclass(frozen=True)
class Completion:
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency_ms: float
    backend: str  # "remote" or "mock"
    retries: int = 0
    seed_forwarded: bool = False

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be >= 0")


Transport = Callable[[dict, dict, float], tuple[int, object]]


def _requests_transport(payload: dict, headers: dict, timeout: float) -> tuple[int, object]:
    url = headers.pop("__url__")
    response = requests.post(url, json=payload, headers=headers, timeout=timeout)
    try:
        body = response.json()
    except ValueError:
        body = response.text
    return response.status_code, body


class ChatGateway:
    """Client for the de-facto chat-completion JSON protocol.

    Retries timeouts, 429s and 5xx responses with exponential backoff; holds
    concurrent requests under ``max_in_flight``. Safe to share across threads.
    """

    backend = "remote"

    def __init__(
        self,
        base_url: str,
        api_key: Optional[str] = None,
        timeout: float = 60.0,
        max_retries: int = DEFAULT_MAX_RETRIES,
        backoff: float = DEFAULT_BACKOFF,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        transport: Optional[Transport] = None,
        trace_path: str | Path | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._transport = transport or _requests_transport
        self._semaphore = threading.BoundedSemaphore(max_in_flight)
        self._trace_path = Path(trace_path) if trace_path else None
        self._trace_lock = threading.Lock()

    def complete(self, prompt: RenderedPrompt, params: GenerationParams) -> Completion:
        payload = {
            "model": params.model_id,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
        }
        if params.stop:
            payload["stop"] = list(params.stop)
        if params.seed is not None:
            payload["seed"] = params.seed
        with self._semaphore:
            return self._complete_with_retries(payload, params)

    def _complete_with_retries(self, payload: dict, params: GenerationParams) -> Completion:
        start = time.monotonic()
        last_failure = "no attempt made"
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            headers = {
                "__url__": f"{self.base_url}/chat/completions",
                "Authorization": f"Bearer {self.api_key}",
                "Content-Type": "application/json",
            }
            try:
                status, body = self._transport(payload, headers, self.timeout)
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_failure = f"transport error: {exc}"
                self._trace(payload, {"error": str(exc)}, attempt)
                continue
            self._trace(payload, {"status": status, "body": body}, attempt)
            if status in (401, 403):
                raise AuthenticationError(f"authentication failed (HTTP {status})")
            if status in RETRYABLE_STATUS:
                last_failure = f"HTTP {status}"
                continue
            if status != 200:
                raise ProtocolError(f"non-retryable protocol error (HTTP {status}): {body}")
            return self._parse(body, params, attempt, start)
        raise RetryBudgetExceeded(
            f"gave up after {self.max_retries + 1} attempts; last failure: {last_failure}"
        )

    def _parse(self, body: object, params: GenerationParams, retries: int, start: float) -> Completion:
        if not isinstance(body, dict):
            raise ProtocolError(f"response is not a JSON object: {body!r}")
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"response missing text: {body!r}") from exc
        if text is None:
            raise ProtocolError("response text is null")
        usage = body.get("usage") or {}
        return Completion(
            text=str(text),
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            latency_ms=(time.monotonic() - start) * 1000.0,
            backend=self.backend,
            retries=retries,
            seed_forwarded=params.seed is not None,
        )

    def _trace(self, payload: dict, response: dict, attempt: int) -> None:
        if self._trace_path is None:
            return
        record = {
            "attempt": attempt,
            "request": payload,
            "response": response,
            "credential": "<redacted>",
        }
        line = json.dumps(record, ensure_ascii=False, default=str)
        with self._trace_lock:
            with self._trace_path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")


def mock_complete(prompt: RenderedPrompt, params: GenerationParams, seed: int = 0) -> Completion:
    """Deterministic offline completion: the label is the first two top words.

    The output depends only on the prompt manifest (and nominally the seed),
    so identical inputs always produce identical bytes.
    """
    top_words = list(prompt.manifest.get("top_words", []))
    label = " ".join(top_words[:2]) if top_words else "untitled"
    text = (
        "Step 1: Reviewed the document information and drafted guesses.\n"
        "Step 2: Checked the guesses against the top words.\n"
        f"Step 3: <<{label}>>"
    )
    prompt_tokens = len(prompt.system.split()) + len(prompt.user.split())
    return Completion(
        text=text,
        prompt_tokens=prompt_tokens,
        completion_tokens=len(text.split()),
        latency_ms=0.0,
        backend="mock",
        retries=0,
        seed_forwarded=params.seed is not None,
    )


class MockGateway:
    """Drop-in gateway whose completions follow the deterministic mock rule."""

    backend = "mock"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def complete(self, prompt: RenderedPrompt, params: GenerationParams) -> Completion:
        return mock_complete(prompt, params, self.seed)
