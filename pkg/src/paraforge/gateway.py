"""Candidate-translation backends and the round-trip baseline.

Three backend kinds share one small interface (``translate``):

* ``file``: reads candidates from an N-best dump keyed by record id;
* ``http``: a JSON translation service, retried with exponential backoff;
* ``mock``: in-process, for tests and dry runs.

HTTP contract::

    POST {text, source_lang, target_lang, num_candidates, beam_size}
    ->   {candidates: [{text, score}, ...]}
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import httpx

from .errors import BackendTimeout, BackendUnavailable, MalformedResponse, RoundTripError

log = logging.getLogger(__name__)

TOKEN_ENV = "PARAFORGE_BACKEND_TOKEN"
BACKEND_KINDS = ("file", "http", "mock")
RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})
MOCK_MODES = ("identity", "variants", "table")


@dataclass(frozen=True)
class TranslationRequest:
    text: str
    source_lang: str = "en"
    target_lang: str = "en"
    num_candidates: int = 8
    beam_size: int | None = None
    request_id: str = ""

    def __post_init__(self):
        if self.num_candidates < 1:
            raise ValueError("num_candidates must be >= 1")
        if self.beam_size is None:
            object.__setattr__(self, "beam_size", self.num_candidates)
        if self.beam_size < self.num_candidates:
            raise ValueError(f"beam_size {self.beam_size} < num_candidates {self.num_candidates}")

    def payload(self) -> dict:
        return {
            "text": self.text,
            "source_lang": self.source_lang,
            "target_lang": self.target_lang,
            "num_candidates": self.num_candidates,
            "beam_size": self.beam_size,
        }


@dataclass(frozen=True)
class BackendDescriptor:
    kind: str = "mock"
    endpoint: str | None = None
    path: str | None = None
    timeout_ms: int = 30_000
    max_attempts: int = 3
    backoff_s: float = 1.0
    max_in_flight: int | None = None
    mock: str = "variants"
    token: str | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise ValueError("http backend requires an endpoint URL")
        if self.kind == "file" and not self.path:
            raise ValueError("file backend requires a path")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    @property
    def in_flight(self) -> int | None:
        """Concurrency cap; ``None`` means unbounded."""
        if self.max_in_flight is not None:
            return self.max_in_flight
        return 4 if self.kind == "http" else None


class Backend:
    """Something that turns a request into best-first candidate strings."""

    max_in_flight: int | None = None

    def translate(self, request: TranslationRequest) -> list[str]:
        raise NotImplementedError

    def close(self) -> None:
        pass


class MockBackend(Backend):
    """Deterministic in-process backend.

    ``candidates`` (a fixed list) or ``fn`` (text -> list) define the
    output. ``mode="identity"`` echoes the input; ``mode="variants"``
    returns the input followed by each single-token deletion of it.
    ``fail`` maps a request text or id to an exception to raise.
    """

    def __init__(
        self,
        candidates: Sequence[str] | None = None,
        fn: Callable[[TranslationRequest], Sequence[str]] | None = None,
        mode: str = "identity",
        table: Mapping[str, Sequence[str]] | None = None,
        fail: Mapping[str, BaseException] | None = None,
    ):
        if mode not in MOCK_MODES:
            raise ValueError(f"unknown mock mode {mode!r}")
        self.fixed = list(candidates) if candidates is not None else None
        self.fn = fn
        self.mode = mode
        self.table = dict(table or {})
        self.fail = dict(fail or {})
        self.calls: list[TranslationRequest] = []

    def translate(self, request: TranslationRequest) -> list[str]:
        self.calls.append(request)
        for key in (request.request_id, request.text):
            if key in self.fail:
                raise self.fail[key]
        if self.fixed is not None:
            return list(self.fixed)
        if self.fn is not None:
            return list(self.fn(request))
        if self.mode == "table":
            return list(self.table.get(request.request_id) or self.table.get(request.text) or [])
        if self.mode == "variants":
            return token_deletion_variants(request.text)
        return [request.text]


def token_deletion_variants(text: str) -> list[str]:
    words = text.split()
    out = [text]
    for k in range(len(words)):
        out.append(" ".join(words[:k] + words[k + 1 :]))
    return out


class FileBackend(Backend):
    """Serves candidates from an N-best file (TSV or JSONL), keyed by record id."""

    def __init__(self, path: str | os.PathLike, fmt: str | None = None):
        from .corpusio import CorpusManifest, guess_format, read_records

        self.path = Path(path)
        if not self.path.is_file():
            raise BackendUnavailable(f"N-best file not readable: {self.path}")
        fmt = fmt or guess_format(self.path, default="nbest_tsv")
        self.index: dict[str, list[str]] = {}
        self.by_source: dict[str, list[str]] = {}
        for rec in read_records(CorpusManifest(str(self.path), fmt)):
            self.index[rec.id] = list(rec.candidates)
            if rec.source:
                self.by_source.setdefault(rec.source, list(rec.candidates))

    def translate(self, request: TranslationRequest) -> list[str]:
        if request.request_id in self.index:
            return list(self.index[request.request_id])
        if request.text in self.by_source:
            return list(self.by_source[request.text])
        raise BackendUnavailable(f"no N-best entry in {self.path}", request.request_id)


class HttpBackend(Backend):
    """JSON translation service client with retry and exponential backoff."""

    def __init__(
        self,
        endpoint: str,
        *,
        timeout_ms: int = 30_000,
        max_attempts: int = 3,
        backoff_s: float = 1.0,
        max_in_flight: int | None = 4,
        token: str | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self.max_in_flight = max_in_flight
        self.sleep = sleep
        token = token if token is not None else os.environ.get(TOKEN_ENV)
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self.client = httpx.Client(timeout=timeout_ms / 1000.0, headers=headers, transport=transport)
        self.attempts = 0

    def post_json(self, payload: dict, request_id: str = "") -> dict:
        """POST with retries on 429/5xx, timeouts and connection errors."""
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self.sleep(self.backoff_s * 2 ** (attempt - 1))
            self.attempts += 1
            try:
                resp = self.client.post(self.endpoint, json=payload)
            except httpx.TimeoutException as exc:
                last = BackendTimeout(f"timed out after {attempt + 1} attempt(s): {exc}", request_id)
                continue
            except httpx.TransportError as exc:
                last = BackendUnavailable(f"transport error: {exc}", request_id)
                continue
            if resp.status_code in RETRY_STATUSES:
                last = BackendUnavailable(f"HTTP {resp.status_code} after {attempt + 1} attempt(s)", request_id)
                log.debug("retry request=%s status=%d attempt=%d", request_id, resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(f"HTTP {resp.status_code}", request_id)
            try:
                return resp.json()
            except ValueError as exc:
                raise MalformedResponse(f"response is not JSON: {exc}", request_id) from exc
        assert last is not None
        raise last

    def translate(self, request: TranslationRequest) -> list[str]:
        body = self.post_json(request.payload(), request.request_id)
        cands = body.get("candidates") if isinstance(body, dict) else None
        if not isinstance(cands, list):
            raise MalformedResponse("missing 'candidates' list", request.request_id)
        out = []
        for c in cands:
            text = c.get("text") if isinstance(c, dict) else c
            if not isinstance(text, str):
                raise MalformedResponse(f"candidate without text: {c!r}", request.request_id)
            out.append(text)
        return out

    def close(self) -> None:
        self.client.close()


def make_backend(descriptor: BackendDescriptor, **kwargs) -> Backend:
    if descriptor.kind == "file":
        return FileBackend(descriptor.path)
    if descriptor.kind == "http":
        return HttpBackend(
            descriptor.endpoint,
            timeout_ms=descriptor.timeout_ms,
            max_attempts=descriptor.max_attempts,
            backoff_s=descriptor.backoff_s,
            max_in_flight=descriptor.in_flight,
            token=descriptor.token,
            **kwargs,
        )
    return MockBackend(mode=descriptor.mock)


def _resolve(backend: Backend | BackendDescriptor) -> Backend:
    return make_backend(backend) if isinstance(backend, BackendDescriptor) else backend


def fetch_candidates(request: TranslationRequest, backend: Backend | BackendDescriptor) -> list[str]:
    """Best-first candidates, truncated to ``request.num_candidates``."""
    return _resolve(backend).translate(request)[: request.num_candidates]


def fetch_batch(
    requests: Sequence[TranslationRequest],
    backend: Backend | BackendDescriptor,
    *,
    return_exceptions: bool = False,
) -> list:
    """Fetch many requests concurrently, results in request order.

    Concurrency is capped by the backend's ``max_in_flight``. With
    ``return_exceptions`` failures are returned in place of results.
    """
    be = _resolve(backend)

    def one(req):
        try:
            return fetch_candidates(req, be)
        except Exception as exc:
            if return_exceptions:
                return exc
            raise

    cap = be.max_in_flight
    if cap == 1 or len(requests) <= 1:
        return [one(r) for r in requests]
    with ThreadPoolExecutor(max_workers=cap or min(32, len(requests))) as pool:
        return list(pool.map(one, requests))


@dataclass(frozen=True)
class RoundTrip:
    source: str
    pivot: str
    paraphrase: str
    pivot_lang: str


def round_trip_paraphrase(
    text: str,
    pivot_lang: str,
    backend: Backend | BackendDescriptor,
    *,
    source_lang: str = "en",
    request_id: str = "",
    backward: Backend | BackendDescriptor | None = None,
) -> RoundTrip:
    """Translate to ``pivot_lang`` and back, 1-best on both legs.

    ``backward`` overrides the backend used for the return leg.
    """
    fwd = _resolve(backend)
    bwd = _resolve(backward) if backward is not None else fwd
    try:
        pivots = fetch_candidates(
            TranslationRequest(text, source_lang, pivot_lang, 1, request_id=request_id), fwd
        )
        if not pivots:
            raise MalformedResponse("no candidates returned", request_id)
    except Exception as exc:
        raise RoundTripError("forward", exc) from exc
    try:
        backs = fetch_candidates(
            TranslationRequest(pivots[0], pivot_lang, source_lang, 1, request_id=request_id), bwd
        )
        if not backs:
            raise MalformedResponse("no candidates returned", request_id)
    except Exception as exc:
        raise RoundTripError("backward", exc) from exc
    return RoundTrip(source=text, pivot=pivots[0], paraphrase=backs[0], pivot_lang=pivot_lang)


def round_trip_batch(
    texts: Iterable[tuple[str, str]],
    pivot_lang: str,
    backend: Backend | BackendDescriptor,
    *,
    source_lang: str = "en",
) -> list[RoundTrip | RoundTripError]:
    """Round-trip ``(request_id, text)`` items; failures are returned in place."""
    be = _resolve(backend)
    items = list(texts)

    def one(item):
        rid, text = item
        try:
            return round_trip_paraphrase(text, pivot_lang, be, source_lang=source_lang, request_id=rid)
        except RoundTripError as exc:
            return exc

    cap = be.max_in_flight
    if cap == 1 or len(items) <= 1:
        return [one(i) for i in items]
    with ThreadPoolExecutor(max_workers=cap or min(32, len(items))) as pool:
        return list(pool.map(one, items))
