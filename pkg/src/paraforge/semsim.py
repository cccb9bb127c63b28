"""Embedding-based semantic similarity for paraphrase pairs.

The embedding model lives behind a service boundary::

    POST {texts: [...]} -> {model_id, vectors: [[...], ...]}

Cosine *similarity* is computed locally.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import httpx

from .errors import BackendError, BackendUnavailable, DimensionMismatch, MalformedResponse, ZeroVector
from .gateway import HttpBackend
from .selection import ParaphrasePair

log = logging.getLogger(__name__)

TOKEN_ENV = "PARAFORGE_EMBED_TOKEN"
DEFAULT_BATCH_SIZE = 32


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    model_id: str = ""

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding contains non-finite values")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SimilarityScore:
    cosine: float
    model_id: str = ""


class EmbeddingBackend:
    model_id: str = ""
    max_in_flight: int | None = None

    def embed(self, texts: Sequence[str]) -> tuple[str, list[list[float]]]:
        raise NotImplementedError

    def close(self) -> None:
        pass


class MockEmbedder(EmbeddingBackend):
    """Wraps a ``text -> vector`` function; counts backend calls."""

    def __init__(self, fn: Callable[[str], Sequence[float]], model_id: str = "mock", fail_on: Callable[[Sequence[str]], bool] | None = None):
        self.fn = fn
        self.model_id = model_id
        self.fail_on = fail_on
        self.calls = 0

    def embed(self, texts):
        self.calls += 1
        if self.fail_on is not None and self.fail_on(texts):
            raise BackendUnavailable("mock embedding failure")
        return self.model_id, [list(self.fn(t)) for t in texts]


class HttpEmbedder(EmbeddingBackend):
    def __init__(self, endpoint: str, *, token: str | None = None, transport: httpx.BaseTransport | None = None,
                 timeout_ms: int = 60_000, max_attempts: int = 3, backoff_s: float = 1.0,
                 max_in_flight: int | None = 4, sleep: Callable[[float], None] = time.sleep):
        token = token if token is not None else os.environ.get(TOKEN_ENV)
        self.http = HttpBackend(endpoint, timeout_ms=timeout_ms, max_attempts=max_attempts, backoff_s=backoff_s,
                                max_in_flight=max_in_flight, token=token, transport=transport, sleep=sleep)
        self.max_in_flight = max_in_flight

    def embed(self, texts):
        body = self.http.post_json({"texts": list(texts)})
        if not isinstance(body, dict) or not isinstance(body.get("vectors"), list):
            raise MalformedResponse("missing 'vectors' list")
        return str(body.get("model_id", "")), body["vectors"]

    def close(self) -> None:
        self.http.close()


def embed_batch(texts: Sequence[str], backend: EmbeddingBackend) -> list[EmbeddingVector]:
    """One vector per text, in input order, all of the same dimension."""
    texts = list(texts)
    if not texts:
        raise ValueError("embed_batch needs at least one text")
    for i, t in enumerate(texts):
        if not t.strip():
            log.warning("embedding empty text at batch position %d", i)
    model_id, vectors = backend.embed(texts)
    if len(vectors) != len(texts):
        raise DimensionMismatch(f"backend returned {len(vectors)} vectors for {len(texts)} texts")
    try:
        out = [EmbeddingVector(tuple(float(x) for x in v), model_id) for v in vectors]
    except (TypeError, ValueError) as exc:
        raise MalformedResponse(f"bad vector payload: {exc}") from exc
    dims = {len(v) for v in out}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed vector dimensions {sorted(dims)}")
    return out


def cosine(a: EmbeddingVector | Sequence[float], b: EmbeddingVector | Sequence[float]) -> SimilarityScore:
    va = a.values if isinstance(a, EmbeddingVector) else tuple(a)
    vb = b.values if isinstance(b, EmbeddingVector) else tuple(b)
    if len(va) != len(vb):
        raise DimensionMismatch(f"dimensions differ: {len(va)} vs {len(vb)}")
    na = math.sqrt(math.fsum(x * x for x in va))
    nb = math.sqrt(math.fsum(x * x for x in vb))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for a zero vector")
    dot = math.fsum(x * y for x, y in zip(va, vb))
    value = dot / (na * nb)
    model_id = a.model_id if isinstance(a, EmbeddingVector) else ""
    return SimilarityScore(max(-1.0, min(1.0, value)), model_id)


@dataclass
class ScoringFailures:
    pair_ids: list[str] = dataclasses.field(default_factory=list)
    errors: list[str] = dataclasses.field(default_factory=list)


def _chunks(it: Iterable[ParaphrasePair], size: int) -> Iterator[list[ParaphrasePair]]:
    buf = []
    for p in it:
        buf.append(p)
        if len(buf) == size:
            yield buf
            buf = []
    if buf:
        yield buf


def _score_chunk(chunk: list[ParaphrasePair], backend: EmbeddingBackend, failures: ScoringFailures) -> list[ParaphrasePair]:
    texts = [t for p in chunk for t in (p.sentence_a, p.sentence_b)]
    try:
        vecs = embed_batch(texts, backend)
    except (BackendError, DimensionMismatch) as exc:
        failures.pair_ids.extend(p.id for p in chunk)
        failures.errors.append(str(exc))
        return [dataclasses.replace(p, cosine=None) for p in chunk]
    out = []
    for k, p in enumerate(chunk):
        try:
            value = cosine(vecs[2 * k], vecs[2 * k + 1]).cosine
        except ZeroVector as exc:
            failures.pair_ids.append(p.id)
            failures.errors.append(f"{p.id}: {exc}")
            value = None
        out.append(dataclasses.replace(p, cosine=value))
    return out


def score_pairs(
    pairs: Iterable[ParaphrasePair],
    backend: EmbeddingBackend,
    *,
    batch_size: int = DEFAULT_BATCH_SIZE,
    failures: ScoringFailures | None = None,
) -> Iterator[ParaphrasePair]:
    """Fill ``cosine`` on every pair; ``batch_size`` pairs per backend call.

    A failed batch yields its pairs with ``cosine=None`` and is recorded
    in ``failures``; the output count always equals the input count.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if failures is None:
        failures = ScoringFailures()
    cap = backend.max_in_flight
    if not cap or cap == 1:
        for chunk in _chunks(pairs, batch_size):
            yield from _score_chunk(chunk, backend, failures)
        return
    # Bounded look-ahead: at most ``cap`` batches in flight, yielded in order.
    with ThreadPoolExecutor(max_workers=cap) as pool:
        pending = []
        for chunk in _chunks(pairs, batch_size):
            pending.append(pool.submit(_score_chunk, chunk, backend, failures))
            if len(pending) >= cap:
                yield from pending.pop(0).result()
        for fut in pending:
            yield from fut.result()
