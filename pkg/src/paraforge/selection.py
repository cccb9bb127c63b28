"""Diverse-pair selection over N-best lists and BLEU-band filtering.

For each source sentence the decoder yields ranked candidates. Every
unordered pair of distinct candidates is scored with direction-averaged
BLEU and the lowest-scoring (most lexically diverse) pair becomes the
paraphrase pair.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .errors import SkipRecord
from .metrics import DEFAULT_BLEU, BleuConfig, NgramStats, bleu_from_stats, jaccard
from .textnorm import TokenizationMode, normalize

log = logging.getLogger(__name__)

SKIP_REASONS = ("too_few_candidates", "all_duplicates", "all_empty", "malformed")


@dataclass(frozen=True)
class NBestRecord:
    id: str
    candidates: tuple[str, ...]
    source: str = ""
    language: str = ""


@dataclass(frozen=True)
class Provenance:
    source_id: str
    config_fp: str


@dataclass(frozen=True)
class ParaphrasePair:
    id: str
    sentence_a: str
    sentence_b: str
    index_a: int
    index_b: int
    bleu: float
    jaccard: float
    cosine: float | None = None
    manual: float | None = None
    lang: str = ""
    provenance: Provenance = field(default_factory=lambda: Provenance("", ""))

    def __post_init__(self):
        if self.index_a == self.index_b:
            raise ValueError(f"pair {self.id!r}: index_a == index_b")


@dataclass(frozen=True)
class FilterRange:
    lo: float = 0.0
    hi: float = 100.0

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 100.0):
            raise ValueError(f"invalid BLEU band [{self.lo}, {self.hi}]; need 0 <= lo <= hi <= 100")

    def __contains__(self, bleu: float) -> bool:
        return self.lo <= bleu <= self.hi

    def __str__(self) -> str:
        return f"{self.lo:g}-{self.hi:g}"


@dataclass
class FilterSummary:
    kept: int = 0
    dropped_low: int = 0
    dropped_high: int = 0

    @property
    def total(self) -> int:
        return self.kept + self.dropped_low + self.dropped_high


@dataclass(frozen=True)
class SkipEntry:
    record_id: str
    reason: str
    detail: str = ""
    index: int | None = None


@dataclass
class SkipReport:
    entries: list[SkipEntry] = field(default_factory=list)

    def add(self, entry: SkipEntry) -> None:
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.entries:
            out[e.reason] = out.get(e.reason, 0) + 1
        return out


def usable_candidates(
    candidates: Sequence[str], mode: TokenizationMode = "word", record_id: str | None = None
) -> list[tuple[int, tuple[str, ...]]]:
    """Return ``(original_index, tokens)`` for non-empty, first-seen candidates.

    Raises :class:`SkipRecord` when fewer than two survive.
    """
    if len(candidates) < 2:
        raise SkipRecord("too_few_candidates", record_id, f"{len(candidates)} candidate(s)")
    seen: set[tuple[str, ...]] = set()
    kept: list[tuple[int, tuple[str, ...]]] = []
    non_empty = 0
    for i, cand in enumerate(candidates):
        if not isinstance(cand, str):
            raise SkipRecord("malformed", record_id, f"candidate {i} is {type(cand).__name__}, not str")
        toks = normalize(cand, mode).tokens
        if not toks:
            continue
        non_empty += 1
        if toks in seen:
            continue
        seen.add(toks)
        kept.append((i, toks))
    if non_empty == 0:
        raise SkipRecord("all_empty", record_id)
    if len(kept) < 2:
        reason = "all_duplicates" if non_empty >= 2 else "too_few_candidates"
        raise SkipRecord(reason, record_id, f"{len(kept)} distinct non-empty candidate(s)")
    return kept


def select_diverse_pair(
    record: NBestRecord,
    config: BleuConfig = DEFAULT_BLEU,
    mode: TokenizationMode = "word",
    *,
    config_fp: str = "",
) -> ParaphrasePair:
    """Pick the candidate pair with the lowest symmetric BLEU.

    Ties go to the lexicographically smallest ``(i, j)`` of original
    candidate indices, favouring higher-ranked hypotheses.
    """
    kept = usable_candidates(record.candidates, mode, record.id)
    stats = [NgramStats(toks, config.max_ngram_order) for _, toks in kept]
    best = None
    best_score = float("inf")
    for a in range(len(kept)):
        for b in range(a + 1, len(kept)):
            score = (
                bleu_from_stats(stats[a], stats[b], config).score
                + bleu_from_stats(stats[b], stats[a], config).score
            ) / 2.0
            if score < best_score:
                best_score = score
                best = (a, b)
    a, b = best
    (i, toks_i), (j, toks_j) = kept[a], kept[b]
    return ParaphrasePair(
        id=record.id,
        sentence_a=record.candidates[i],
        sentence_b=record.candidates[j],
        index_a=i,
        index_b=j,
        bleu=best_score,
        jaccard=float(jaccard(toks_i, toks_j)),
        lang=record.language,
        provenance=Provenance(source_id=record.id, config_fp=config_fp),
    )


def filter_pairs(
    pairs: Iterable[ParaphrasePair], band: FilterRange, summary: FilterSummary | None = None
) -> Iterator[ParaphrasePair]:
    """Yield pairs with ``band.lo <= bleu <= band.hi`` in input order.

    Counts go into ``summary`` as the stream is consumed.
    """
    if summary is None:
        summary = FilterSummary()
    for pair in pairs:
        if pair.bleu < band.lo:
            summary.dropped_low += 1
        elif pair.bleu > band.hi:
            summary.dropped_high += 1
        else:
            summary.kept += 1
            yield pair


def mine_record(
    index: int, record: NBestRecord, config: BleuConfig, mode: TokenizationMode, config_fp: str
) -> ParaphrasePair | SkipEntry:
    """Selection for one record, with skips returned instead of raised."""
    try:
        return select_diverse_pair(record, config, mode, config_fp=config_fp)
    except SkipRecord as exc:
        return SkipEntry(record.id, exc.reason, exc.detail, index)


def mine_corpus(
    records: Iterable[NBestRecord],
    config: BleuConfig = DEFAULT_BLEU,
    mode: TokenizationMode = "word",
    *,
    config_fp: str = "",
    report: SkipReport | None = None,
) -> Iterator[ParaphrasePair]:
    """Select one pair per record, in input order.

    Records that cannot produce a pair, including malformed ones, land in
    ``report`` and processing continues.
    """
    if report is None:
        report = SkipReport()
    for index, record in enumerate(records):
        if not isinstance(record, NBestRecord):
            rid = getattr(record, "id", None) or f"#{index}"
            report.add(SkipEntry(str(rid), "malformed", f"not an NBestRecord: {type(record).__name__}", index))
            continue
        result = mine_record(index, record, config, mode, config_fp)
        if isinstance(result, SkipEntry):
            log.debug("skip record=%s reason=%s", result.record_id, result.reason)
            report.add(result)
        else:
            yield result
