"""Minimal OpenAI-compatible chat-completions client.

POSTs ``{base_url}/chat/completions`` with bearer auth from an environment
variable. Retries 429/5xx/timeouts with exponential backoff and jittered
delays; other 4xx are permanent. The request body is deterministic for fixed
inputs and never contains the API key.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import time
from dataclasses import dataclass, field

import requests

log = logging.getLogger(__name__)

RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


class ClientError(Exception):
    pass


class TransportError(ClientError):
    """Retries exhausted; carries the last HTTP status (or None for timeouts)."""

    def __init__(self, message: str, last_status: int | None, attempts: int):
        super().__init__(message)
        self.last_status = last_status
        self.attempts = attempts


class PermanentHTTPError(ClientError):
    def __init__(self, message: str, status: int):
        super().__init__(message)
        self.status = status


class MalformedResponseError(ClientError):
    pass


@dataclass(frozen=True)
class ModelProfile:
    name: str
    base_url: str
    api_key_env: str = "OPENAI_API_KEY"
    max_context_tokens: int = 128_000
    temperature: float = 0.0
    max_output_tokens: int = 256

    def __post_init__(self) -> None:
        if self.max_context_tokens < 1024:
            raise ValueError("max_context_tokens must be >= 1024")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class RetryPolicy:
    base_delay: float = 1.0
    factor: float = 2.0
    jitter: float = 0.2
    max_attempts: int = 6
    timeout: float = 120.0


@dataclass(frozen=True)
class CompletionResult:
    text: str
    latency_ms: int
    attempt_count: int
    request_fingerprint: str


def request_fingerprint(body: dict) -> str:
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def complete(profile: ModelProfile, messages, *,
             retry: RetryPolicy | None = None,
             limiter=None,
             tokenizer=None,
             session: requests.Session | None = None,
             rng: random.Random | None = None) -> CompletionResult:
    """Send a chat completion and return the first choice's message content.

    ``limiter`` is an optional semaphore bounding global in-flight requests;
    ``tokenizer``, when given, is used for an advisory prompt-budget check.
    """
    if not messages:
        raise ValueError("messages must be non-empty")
    retry = retry or RetryPolicy()
    rng = rng or random.Random()

    body = {
        "model": profile.name,
        "messages": [{"role": r, "content": c} for r, c in _as_pairs(messages)],
        "temperature": profile.temperature,
        "max_tokens": profile.max_output_tokens,
    }
    fingerprint = request_fingerprint(body)

    if tokenizer is not None:
        prompt_tokens = sum(
            tokenizer.count_tokens(m["content"]) for m in body["messages"]
        )
        if prompt_tokens > profile.max_context_tokens:
            log.warning(
                "prompt is %d tokens but %s allows %d; sending anyway "
                "(server-side tokenizer may differ)",
                prompt_tokens, profile.name, profile.max_context_tokens,
            )

    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(profile.api_key_env, "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    url = profile.base_url.rstrip("/") + "/chat/completions"
    http = session or requests
    start = time.monotonic()
    last_status: int | None = None
    last_error = "no attempt made"

    for attempt in range(1, retry.max_attempts + 1):
        try:
            if limiter is not None:
                limiter.acquire()
            try:
                resp = http.post(url, headers=headers, json=body,
                                 timeout=retry.timeout)
            finally:
                if limiter is not None:
                    limiter.release()
        except (requests.Timeout, requests.ConnectionError) as exc:
            last_status = None
            last_error = f"transport failure: {exc}"
        else:
            if resp.status_code == 200:
                text = _extract_text(resp)
                latency = int((time.monotonic() - start) * 1000)
                return CompletionResult(text=text, latency_ms=latency,
                                        attempt_count=attempt,
                                        request_fingerprint=fingerprint)
            last_status = resp.status_code
            last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
            if resp.status_code not in RETRYABLE_STATUSES:
                raise PermanentHTTPError(last_error, status=resp.status_code)
        if attempt < retry.max_attempts:
            delay = retry.base_delay * (retry.factor ** (attempt - 1))
            delay *= 1 + rng.uniform(-retry.jitter, retry.jitter)
            time.sleep(max(delay, 0.0))

    raise TransportError(
        f"gave up after {retry.max_attempts} attempts: {last_error}",
        last_status=last_status, attempts=retry.max_attempts,
    )


def _as_pairs(messages):
    for m in messages:
        if isinstance(m, dict):
            yield m["role"], m["content"]
        else:
            yield m[0], m[1]


def _extract_text(resp) -> str:
    try:
        payload = resp.json()
        text = payload["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponseError(
            f"cannot parse completion response: {exc}: {resp.text[:200]}"
        ) from exc
    if not isinstance(text, str):
        raise MalformedResponseError(f"message content is not text: {text!r}")
    return text
