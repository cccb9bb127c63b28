"""Sentence-level lexical metrics: BLEU, direction-averaged BLEU, Jaccard.

BLEU here is the usual modified n-gram precision with a brevity penalty,
computed on :mod:`paraforge.textnorm` tokens rather than on a separate
scorer tokenizer. Smoothing follows the common sentence-BLEU options
(``exp``, ``floor``, ``add_k``, ``none``); ``exp`` is the default.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence, Union

from .errors import EmptyPair
from .textnorm import NormalizedSentence

SMOOTHING_METHODS = ("none", "floor", "add_k", "exp")

Tokens = Union[NormalizedSentence, Sequence[str]]


@dataclass(frozen=True)
class BleuConfig:
    max_ngram_order: int = 4
    smoothing: str = "exp"
    floor_epsilon: float = 0.1
    add_k: float = 1.0
    scale: float = 100.0

    def __post_init__(self):
        if self.max_ngram_order < 1:
            raise ValueError("max_ngram_order must be >= 1")
        if self.smoothing not in SMOOTHING_METHODS:
            raise ValueError(f"unknown smoothing {self.smoothing!r}; expected one of {SMOOTHING_METHODS}")
        if self.smoothing == "floor" and not self.floor_epsilon > 0:
            raise ValueError("floor_epsilon must be > 0")
        if self.smoothing == "add_k" and not self.add_k > 0:
            raise ValueError("add_k must be > 0")
        if not 0 < self.scale <= 100:
            raise ValueError("scale must be in (0, 100]")

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_BLEU = BleuConfig()


@dataclass(frozen=True)
class BleuBreakdown:
    """Per-order detail of one directional BLEU computation.

    ``precisions`` are the raw clipped precisions, ``smoothed`` the values
    entering the geometric mean. An order where neither side has any
    n-gram counts as a perfect (vacuous) match.
    """

    precisions: tuple[float, ...]
    smoothed: tuple[float, ...]
    brevity_penalty: float
    hypothesis_length: int
    reference_length: int
    score: float
    matches: tuple[int, ...] = field(default=())
    totals: tuple[int, ...] = field(default=())
    degenerate: bool = False


class NgramStats:
    """Cached n-gram counts for one token sequence, up to a fixed order."""

    __slots__ = ("length", "counts")

    def __init__(self, tokens: Tokens, max_order: int = 4):
        toks = tuple(tokens)
        self.length = len(toks)
        self.counts = [
            Counter(toks[i : i + n] for i in range(len(toks) - n + 1))
            for n in range(1, max_order + 1)
        ]


def _ensure_stats(x, order: int) -> NgramStats:
    if isinstance(x, NgramStats) and len(x.counts) >= order:
        return x
    return NgramStats(x, order)


def bleu_from_stats(hyp: NgramStats, ref: NgramStats, config: BleuConfig = DEFAULT_BLEU) -> BleuBreakdown:
    order = config.max_ngram_order
    hlen, rlen = hyp.length, ref.length
    if hlen == 0 and rlen == 0:
        raise EmptyPair("both sentences are empty")
    if hlen == 0 or rlen == 0:
        zeros = (0.0,) * order
        bp = 1.0 if hlen >= rlen else 0.0
        return BleuBreakdown(zeros, zeros, bp, hlen, rlen, 0.0, (0,) * order, (0,) * order, degenerate=True)

    matches, totals, raw, smoothed = [], [], [], []
    running = 1.0
    for n in range(order):
        hc, rc = hyp.counts[n], ref.counts[n]
        total = max(hlen - n, 0)
        match = sum(min(c, rc[g]) for g, c in hc.items()) if total else 0
        matches.append(match)
        totals.append(total)
        if total == 0 and max(rlen - n, 0) == 0:
            raw.append(1.0)
            smoothed.append(1.0)
            continue
        raw.append(match / total if total else 0.0)
        denom = max(total, 1)
        method = config.smoothing
        if match > 0:
            p = match / denom
            if method == "add_k" and n > 0:
                p = (match + config.add_k) / (denom + config.add_k)
        elif method == "exp":
            running *= 2.0
            p = 1.0 / (running * denom)
        elif method == "floor":
            p = config.floor_epsilon / denom
        elif method == "add_k" and n > 0:
            p = config.add_k / (denom + config.add_k)
        else:
            p = 0.0
        smoothed.append(p)

    bp = 1.0 if hlen >= rlen else math.exp(1.0 - rlen / hlen)
    if min(smoothed) <= 0.0:
        score = 0.0
    else:
        log_mean = sum(math.log(p) for p in smoothed) / order
        score = config.scale * bp * math.exp(log_mean)
    return BleuBreakdown(tuple(raw), tuple(smoothed), bp, hlen, rlen, score, tuple(matches), tuple(totals))


def sentence_bleu(hypothesis: Tokens, reference: Tokens, config: BleuConfig = DEFAULT_BLEU) -> BleuBreakdown:
    """Directional sentence BLEU of ``hypothesis`` against ``reference``.

    Raises :class:`EmptyPair` when both sides are empty. An empty side
    against a non-empty one scores 0 with ``degenerate=True``.
    """
    order = config.max_ngram_order
    return bleu_from_stats(_ensure_stats(hypothesis, order), _ensure_stats(reference, order), config)


def symmetric_bleu(a: Tokens, b: Tokens, config: BleuConfig = DEFAULT_BLEU) -> float:
    """Mean of the two directional BLEU scores; no side is the reference."""
    order = config.max_ngram_order
    sa, sb = _ensure_stats(a, order), _ensure_stats(b, order)
    return (bleu_from_stats(sa, sb, config).score + bleu_from_stats(sb, sa, config).score) / 2.0


class JaccardScore(float):
    """A float that also records whether both token sets were empty."""

    degenerate: bool

    def __new__(cls, value: float, degenerate: bool = False):
        obj = super().__new__(cls, value)
        obj.degenerate = degenerate
        return obj


def jaccard(a: Tokens, b: Tokens) -> JaccardScore:
    """Intersection over union of the two token *sets*."""
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return JaccardScore(1.0, degenerate=True)
    return JaccardScore(len(sa & sb) / len(sa | sb))
