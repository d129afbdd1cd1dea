"""Provider-agnostic chat-completion and embedding client.

One client speaks the common chat-completions JSON shape over HTTPS for all
API-based models; a deterministic in-process mock is a first-class provider
used by every test and the end-to-end dry run. Credentials are referenced by
environment variable name and never serialized.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    AuthError,
    ConfigError,
    ContentRefusedByProvider,
    MalformedResponseError,
    ProviderError,
    ProviderTimeout,
    RateLimitedError,
    TransientProviderError,
)


@dataclass
class ChatRequest:
    model: str
    messages: list[dict]
    temperature: float = 0.0
    top_k: int | None = None
    top_p: float | None = None
    max_tokens: int = 1024

    def __post_init__(self):
        if not self.messages:
            raise ConfigError("ChatRequest requires at least one message")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")

    def last_content(self) -> str:
        return self.messages[-1].get("content", "")


@dataclass
class ProviderConfig:
    endpoint: str = ""
    model: str = ""
    api_key_env: str = ""
    rpm: int = 600
    max_retries: int = 3
    timeout_s: float = 30.0
    parallelism: int = 4
    backoff_s: float = 0.5

    def __post_init__(self):
        if self.rpm <= 0 or self.parallelism <= 0 or self.timeout_s <= 0:
            raise ConfigError("rpm, parallelism and timeout must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")

    @classmethod
    def from_json(cls, obj: dict) -> "ProviderConfig":
        return cls(
            endpoint=obj.get("endpoint", ""),
            model=obj.get("model", ""),
            api_key_env=obj.get("api_key_env", ""),
            rpm=int(obj.get("rpm", 600)),
            max_retries=int(obj.get("retries", obj.get("max_retries", 3))),
            timeout_s=float(obj["timeout_ms"]) / 1000.0 if "timeout_ms" in obj
            else float(obj.get("timeout_s", 30.0)),
            parallelism=int(obj.get("parallelism", 4)),
        )


@dataclass
class CompletionResult:
    text: str
    usage: dict = field(default_factory=dict)
    latency_s: float = 0.0
    attempts: int = 1


@dataclass
class BatchItem:
    """One slot of a complete_batch result, aligned with the request list."""
    ok: bool
    result: CompletionResult | None = None
    error: str | None = None
    error_type: str | None = None


class HttpProvider:
    """Chat-completions JSON over HTTPS (the de-facto common wire shape)."""

    def __init__(self, cfg: ProviderConfig):
        if not cfg.endpoint:
            raise ConfigError("HttpProvider requires an endpoint")
        self.cfg = cfg

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.cfg.api_key_env:
            key = os.environ.get(self.cfg.api_key_env)
            if not key:
                raise AuthError(
                    f"environment variable {self.cfg.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def send(self, req: ChatRequest) -> tuple[str, dict]:
        import requests

        payload: dict = {
            "model": req.model or self.cfg.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        if req.top_p is not None:
            payload["top_p"] = req.top_p
        if req.top_k is not None:
            payload["top_k"] = req.top_k
        try:
            resp = requests.post(
                self.cfg.endpoint.rstrip("/") + "/chat/completions",
                json=payload, headers=self._headers(), timeout=self.cfg.timeout_s)
        except requests.Timeout as exc:
            raise ProviderTimeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise TransientProviderError(str(exc)) from exc
        self._raise_for_status(resp.status_code, resp.text)
        try:
            doc = resp.json()
            choice = doc["choices"][0]
            if choice.get("finish_reason") == "content_filter":
                raise ContentRefusedByProvider("provider content filter triggered")
            return choice["message"]["content"], doc.get("usage", {})
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise MalformedResponseError(f"unexpected response shape: {exc}") from exc

    def embed(self, texts: list[str], model: str = "") -> list[list[float]]:
        import requests

        payload = {"model": model or self.cfg.model, "input": texts}
        try:
            resp = requests.post(
                self.cfg.endpoint.rstrip("/") + "/embeddings",
                json=payload, headers=self._headers(), timeout=self.cfg.timeout_s)
        except requests.Timeout as exc:
            raise ProviderTimeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise TransientProviderError(str(exc)) from exc
        self._raise_for_status(resp.status_code, resp.text)
        try:
            doc = resp.json()
            return [item["embedding"] for item in doc["data"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponseError(f"unexpected response shape: {exc}") from exc

    @staticmethod
    def _raise_for_status(status: int, body: str) -> None:
        snippet = body[:200]
        if status in (401, 403):
            raise AuthError(f"HTTP {status}: {snippet}")
        if status == 429:
            raise RateLimitedError(f"HTTP {status}: {snippet}")
        if status >= 500:
            raise TransientProviderError(f"HTTP {status}: {snippet}")
        if status >= 400:
            raise MalformedResponseError(f"HTTP {status}: {snippet}")


_ERROR_KINDS = {
    "auth": AuthError,
    "rate_limited": RateLimitedError,
    "timeout": ProviderTimeout,
    "server": TransientProviderError,
    "malformed": MalformedResponseError,
    "refused": ContentRefusedByProvider,
}

# Safe filler vocabulary for synthesized mock responses: no token or pair of
# adjacent tokens may form a refusal keyword.
_MOCK_VOCAB = ("今天", "我们", "看到", "内容", "消息", "活动", "朋友", "时间",
               "平台", "大家", "一起", "非常", "特别", "真的", "直接", "了解")
MOCK_REFUSAL_TEXT = "抱歉，我无法生成该内容。"


def deterministic_teacher_text(prompt: str, refusal_rate_mod: int = 9) -> str:
    """Pseudo response derived from the prompt bytes: unique per prompt and
    stable across runs; roughly one request in `refusal_rate_mod` yields a
    refusal so downstream filtering has work to do."""
    digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
    if refusal_rate_mod > 0 and int(digest[:8], 16) % refusal_rate_mod == 0:
        return MOCK_REFUSAL_TEXT
    words = [_MOCK_VOCAB[int(digest[i:i + 2], 16) % len(_MOCK_VOCAB)]
             for i in range(0, 16, 2)]
    return "".join(words) + digest[:12]


def deterministic_embedding(text: str, dim: int = 32) -> list[float]:
    """Unit-norm pseudo embedding from the text bytes; stable across runs."""
    out = []
    counter = 0
    while len(out) < dim:
        block = hashlib.sha256(f"{counter}:{text}".encode("utf-8")).digest()
        out.extend(b / 255.0 - 0.5 for b in block)
        counter += 1
    vec = out[:dim]
    norm = sum(v * v for v in vec) ** 0.5 or 1.0
    return [v / norm for v in vec]


class MockProvider:
    """Deterministic in-process provider.

    Behavior comes from an ordered rule list; the first matching rule wins.
    Rules match on the global request index or on a substring of the last
    message. Without rules, the default applies: a fixed text, echo of the
    last message, or the deterministic teacher synthesizer.
    """

    def __init__(self, fn=None, rules: list[dict] | None = None,
                 default: dict | None = None, embed_dim: int = 32,
                 latency_fn=None):
        self._fn = fn
        self._rules = rules or []
        self._default = default or {"teacher": True}
        self._embed_dim = embed_dim
        self._latency_fn = latency_fn
        self._lock = threading.Lock()
        self._index = 0
        self._active = 0
        self.max_concurrency = 0
        self.calls = 0

    @classmethod
    def from_script(cls, script: dict | str | Path) -> "MockProvider":
        """Script shape: {"rules": [...], "default": {...}, "embed_dim": int}."""
        if not isinstance(script, dict):
            script = json.loads(Path(script).read_text(encoding="utf-8"))
        return cls(rules=script.get("rules", []),
                   default=script.get("default", {"teacher": True}),
                   embed_dim=int(script.get("embed_dim", 32)))

    def _enter(self) -> int:
        with self._lock:
            idx = self._index
            self._index += 1
            self.calls += 1
            self._active += 1
            self.max_concurrency = max(self.max_concurrency, self._active)
        return idx

    def _exit(self) -> None:
        with self._lock:
            self._active -= 1

    def send(self, req: ChatRequest) -> tuple[str, dict]:
        idx = self._enter()
        try:
            if self._latency_fn is not None:
                time.sleep(self._latency_fn(idx))
            if self._fn is not None:
                return self._fn(req, idx), {}
            last = req.last_content()
            for rule in self._rules:
                if "index" in rule and rule["index"] != idx:
                    continue
                if "pattern" in rule and rule["pattern"] not in last:
                    continue
                if "error" in rule:
                    raise _ERROR_KINDS[rule["error"]](f"scripted error at index {idx}")
                return rule.get("text", ""), rule.get("usage", {})
            return self._apply_default(last), {}
        finally:
            self._exit()

    def _apply_default(self, last: str) -> str:
        if self._default.get("echo_last"):
            return last
        if "text" in self._default:
            return self._default["text"]
        return deterministic_teacher_text(last)

    def embed(self, texts: list[str], model: str = "") -> list[list[float]]:
        idx = self._enter()
        try:
            if self._latency_fn is not None:
                time.sleep(self._latency_fn(idx))
            return [deterministic_embedding(t, self._embed_dim) for t in texts]
        finally:
            self._exit()


class RateLimiter:
    """Spaces request starts so the issue rate never exceeds rpm."""

    def __init__(self, rpm: int, clock=time.monotonic, sleep=time.sleep):
        self._interval = 60.0 / rpm
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            slot = max(now, self._next_slot)
            self._next_slot = slot + self._interval
            wait = slot - now
        if wait > 0:
            self._sleep(wait)


class LlmClient:
    """Retrying, rate-limited client over any provider object.

    Transient failures (rate limiting, timeouts, 5xx) are retried with
    exponential backoff plus jitter, up to cfg.max_retries retries.
    """

    def __init__(self, cfg: ProviderConfig, provider=None, *,
                 sleep=time.sleep, clock=time.monotonic,
                 jitter_rng: random.Random | None = None):
        self.cfg = cfg
        self.provider = provider if provider is not None else HttpProvider(cfg)
        self._sleep = sleep
        self._clock = clock
        self._rng = jitter_rng if jitter_rng is not None else random.Random()
        self._limiter = RateLimiter(cfg.rpm, clock=clock, sleep=sleep)

    def complete(self, req: ChatRequest) -> CompletionResult:
        attempt = 0
        while True:
            attempt += 1
            self._limiter.acquire()
            start = self._clock()
            try:
                text, usage = self.provider.send(req)
                return CompletionResult(text=text, usage=usage,
                                        latency_s=self._clock() - start,
                                        attempts=attempt)
            except ProviderError as exc:
                if not exc.retryable or attempt > self.cfg.max_retries:
                    raise
                delay = self.cfg.backoff_s * (2 ** (attempt - 1))
                delay += self._rng.uniform(0, self.cfg.backoff_s)
                self._sleep(delay)

    def complete_batch(self, reqs: list[ChatRequest]) -> list[BatchItem]:
        if not reqs:
            return []
        results: list[BatchItem] = [BatchItem(ok=False)] * len(reqs)

        def run(i: int, req: ChatRequest) -> None:
            try:
                results[i] = BatchItem(ok=True, result=self.complete(req))
            except ProviderError as exc:
                results[i] = BatchItem(ok=False, error=str(exc),
                                       error_type=type(exc).__name__)

        workers = min(self.cfg.parallelism, len(reqs))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run, i, r) for i, r in enumerate(reqs)]
            for f in futures:
                f.result()
        return results

    def embed(self, texts: list[str], model: str = "") -> list[list[float]]:
        if not texts:
            return []
        attempt = 0
        while True:
            attempt += 1
            self._limiter.acquire()
            try:
                vectors = self.provider.embed(texts, model or self.cfg.model)
                break
            except ProviderError as exc:
                if not exc.retryable or attempt > self.cfg.max_retries:
                    raise
                delay = self.cfg.backoff_s * (2 ** (attempt - 1))
                delay += self._rng.uniform(0, self.cfg.backoff_s)
                self._sleep(delay)
        if len(vectors) != len(texts):
            raise MalformedResponseError(
                f"provider returned {len(vectors)} vectors for {len(texts)} inputs")
        dims = {len(v) for v in vectors}
        if len(dims) > 1:
            raise MalformedResponseError(f"inconsistent embedding dimensions: {sorted(dims)}")
        return vectors
