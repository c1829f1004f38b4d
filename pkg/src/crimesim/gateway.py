"""Chat-completion transport: bounded concurrency, retry with full-jitter
exponential backoff, transcript capture, and a canned-fixture mock.

The wire shape is the de-facto chat-completions one: the request body is
{model, messages:[{role:"system"},{role:"user"}], temperature,
max_tokens} and the reply text is read from choices[0].message.content,
so any compatible endpoint works through the single adapter.
"""
from __future__ import annotations

import json
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import CrimesimError, InputError, PermanentRejection, TransportError, TransportExhausted


@dataclass(frozen=True)
class CompletionRequest:
    system_text: str
    user_text: str
    model: str = "default"
    temperature: float = 0.0
    max_tokens: int = 1024
    tag: str = ""

    def __post_init__(self):
        if not self.system_text or not self.user_text:
            raise InputError("request texts must be non-empty")
        if self.temperature < 0 or self.max_tokens <= 0:
            raise InputError("temperature must be >= 0 and max_tokens positive")


@dataclass
class GatewayConfig:
    base_url: str = ""
    api_key_env_name: str = "CRIMESIM_API_KEY"
    max_in_flight: int = 64
    retry_max: int = 3
    backoff_base_ms: int = 200
    timeout_ms: int = 30000
    transcript_path: str | None = None

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise InputError("max_in_flight must be >= 1")

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in (d or {}).items() if k in cls.__dataclass_fields__}
        return cls(**known)


def build_payload(request):
    return {
        "model": request.model,
        "messages": [
            {"role": "system", "content": request.system_text},
            {"role": "user", "content": request.user_text},
        ],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    }


def backoff_schedule(config, attempts):
    """Pre-jitter backoff delays (seconds); non-decreasing in attempt."""
    return [config.backoff_base_ms * (2 ** a) / 1000.0 for a in range(attempts)]


class HttpTransport:
    """POSTs the payload to the configured endpoint with a bearer key."""

    def __init__(self, config):
        self.config = config

    def __call__(self, request, payload):
        import requests

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env_name, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = requests.post(self.config.base_url, json=payload, headers=headers,
                                 timeout=self.config.timeout_ms / 1000.0)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        try:
            body = resp.json()
        except ValueError:
            body = {}
        return resp.status_code, body


class FixtureTransport:
    """Canned transport for tests and offline runs.

    `responses` maps request tag -> completion text. `failures` maps
    tag -> list of status codes (or "error" for a connection fault) to
    emit before the canned success. Tracks peak concurrent calls so
    in-flight bounds can be asserted.
    """

    def __init__(self, responses=None, failures=None, default_text=None, latency_s=0.0):
        self.responses = dict(responses or {})
        self.failures = {k: list(v) for k, v in (failures or {}).items()}
        self.default_text = default_text
        self.latency_s = latency_s
        self.calls = 0
        self.in_flight = 0
        self.peak_in_flight = 0
        self._lock = threading.Lock()

    @classmethod
    def from_transcript(cls, path):
        return cls(responses=load_transcript(path))

    def __call__(self, request, payload):
        with self._lock:
            self.calls += 1
            self.in_flight += 1
            self.peak_in_flight = max(self.peak_in_flight, self.in_flight)
        try:
            if self.latency_s:
                time.sleep(self.latency_s)
            pending = self.failures.get(request.tag)
            if pending:
                status = pending.pop(0)
                if status == "error":
                    raise TransportError("scripted connection fault")
                return int(status), {}
            text = self.responses.get(request.tag, self.default_text)
            if text is None:
                return 404, {}
            return 200, {"choices": [{"message": {"content": text}}]}
        finally:
            with self._lock:
                self.in_flight -= 1


class TranscriptWriter:
    """Thread-safe JSONL capture of request/response pairs for audit and
    replay."""

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()
        open(path, "w", encoding="utf-8").close()

    def record(self, request, response_text=None, error=None, attempts=0):
        entry = {
            "tag": request.tag,
            "model": request.model,
            "system_text": request.system_text,
            "user_text": request.user_text,
            "response": response_text,
            "error": error,
            "attempts": attempts,
        }
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")


def load_transcript(path):
    """tag -> response text for completed entries."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            entry = json.loads(line)
            if entry.get("response") is not None:
                out[entry["tag"]] = entry["response"]
    return out


def _extract_text(body):
    try:
        return body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportError("response body lacks choices[0].message.content") from exc


def complete(request, config, transport=None, sleeper=time.sleep, stats=None,
             transcript=None):
    """One completion with retries.

    Transport faults, HTTP 429, and 5xx retry with full-jitter
    exponential backoff up to config.retry_max retries; any other 4xx
    rejects immediately. Returns the first choice's message text.
    """
    transport = transport or HttpTransport(config)
    payload = build_payload(request)
    delays = backoff_schedule(config, config.retry_max)
    last_status = None
    attempts = 0
    try:
        for attempt in range(config.retry_max + 1):
            attempts = attempt + 1
            try:
                status, body = transport(request, payload)
            except TransportError:
                if attempt >= config.retry_max:
                    raise TransportExhausted("transport errors exhausted retries",
                                             last_status=None)
                sleeper(random.random() * delays[attempt])
                continue
            last_status = status
            if status == 200:
                text = _extract_text(body)
                if stats is not None:
                    stats["attempts"] = attempts
                if transcript is not None:
                    transcript.record(request, response_text=text, attempts=attempts)
                return text
            if status == 429 or status >= 500:
                if attempt >= config.retry_max:
                    raise TransportExhausted(f"retries exhausted, last status {status}",
                                             last_status=status)
                sleeper(random.random() * delays[attempt])
                continue
            raise PermanentRejection(f"endpoint rejected request with status {status}",
                                     status=status)
    except CrimesimError as exc:
        if stats is not None:
            stats["attempts"] = attempts
        if transcript is not None:
            transcript.record(request, error=str(exc), attempts=attempts)
        raise
    raise TransportExhausted("retries exhausted", last_status=last_status)


def complete_batch(requests, config, transport=None, sleeper=time.sleep,
                   transcript=None):
    """Complete many requests with at most config.max_in_flight
    outstanding at any instant.

    Returns a total map tag -> text or error; per-tag outcomes are
    independent and a failure never hides another tag's success.
    """
    requests = list(requests)
    tags = [r.tag for r in requests]
    if len(set(tags)) != len(tags):
        raise InputError("request tags must be unique within a batch")
    if not requests:
        return {}
    transport = transport or HttpTransport(config)
    results = {}

    def run_one(req):
        try:
            return complete(req, config, transport=transport, sleeper=sleeper,
                            transcript=transcript)
        except CrimesimError as exc:
            return exc

    workers = min(config.max_in_flight, len(requests))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for tag, outcome in zip(tags, pool.map(run_one, requests)):
            results[tag] = outcome
    return results
