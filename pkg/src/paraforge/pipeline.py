"""Batch drivers behind the CLI: resumable mining, rescoring, round-trip.

Mining writes to ``<output>.part`` and keeps a checkpoint in
``<output>.ckpt`` with the committed byte offsets of the pair and skip
files. A resumed run truncates both files to those offsets and carries
on from the next record, so an interrupted-then-resumed run produces the
same bytes as an uninterrupted one.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import multiprocessing
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .config import PipelineConfig
from .corpusio import (
    Checkpoint,
    CorpusManifest,
    SourceRecord,
    file_checksum,
    guess_format,
    pair_to_line,
    read_records,
)
from .errors import BackendError, EmptyPair
from .gateway import Backend, TranslationRequest, fetch_batch, make_backend, round_trip_batch
from .metrics import NgramStats, bleu_from_stats, jaccard
from .selection import (
    FilterRange,
    FilterSummary,
    NBestRecord,
    ParaphrasePair,
    Provenance,
    SkipEntry,
    SkipReport,
    mine_record,
)
from .textnorm import normalize

log = logging.getLogger(__name__)

NBEST_FORMATS = ("nbest_tsv", "nbest_jsonl")


@dataclass
class MineResult:
    manifest: CorpusManifest
    records: int = 0
    pairs: int = 0
    skips: SkipReport = field(default_factory=SkipReport)
    filter_summary: FilterSummary | None = None
    resumed_from: int = -1


def _mine_task(args):
    return mine_record(*args)


def _skip_line(entry: SkipEntry) -> str:
    return json.dumps(dataclasses.asdict(entry), ensure_ascii=False) + "\n"


def _blocks(it: Iterable, size: int) -> Iterator[list]:
    buf = []
    for x in it:
        buf.append(x)
        if len(buf) == size:
            yield buf
            buf = []
    if buf:
        yield buf


def _truncate(path: Path, size: int) -> None:
    with open(path, "r+b") as f:
        f.truncate(size)


def default_workers() -> int:
    return os.cpu_count() or 1


def run_mine(
    cfg: PipelineConfig,
    input_path: str | os.PathLike,
    output_path: str | os.PathLike,
    *,
    input_format: str | None = None,
    workers: int | None = None,
    resume: bool = False,
    backend: Backend | None = None,
    block_size: int = 256,
    on_commit: Callable[[int, int], None] | None = None,
) -> MineResult:
    """Mine a paraphrase corpus from N-best lists or from source text.

    For ``txt_lines`` input the candidates come from ``backend`` (or the
    configured backend descriptor); N-best files are used directly.
    ``on_commit(records_done, pairs_done)`` runs after every checkpoint.
    """
    input_path = str(input_path)
    out = Path(output_path)
    part = out.with_name(out.name + ".part")
    skips_path = out.with_name(out.name + ".skips.jsonl")
    skips_part = skips_path.with_name(skips_path.name + ".part")
    ckpt_path = out.with_name(out.name + ".ckpt")

    fmt = input_format or guess_format(input_path)
    if fmt not in NBEST_FORMATS + ("txt_lines",):
        raise ValueError(f"cannot mine from format {fmt!r}")
    manifest = CorpusManifest(input_path, fmt, cfg.lang)
    checksum = file_checksum(input_path)
    fp = cfg.fingerprint()
    mode = cfg.mode_for()
    workers = workers or cfg.workers or default_workers()
    every = max(1, cfg.checkpoint_every)

    result = MineResult(CorpusManifest(str(out), "pairs_jsonl", cfg.lang))
    if cfg.filter is not None:
        result.filter_summary = FilterSummary()

    start = 0
    if resume and ckpt_path.exists() and part.exists():
        ckpt = Checkpoint.load(ckpt_path)
        ckpt.check(checksum, fp)
        offsets = ckpt.offsets or {}
        _truncate(part, offsets.get("pairs", 0))
        if skips_part.exists():
            _truncate(skips_part, offsets.get("skips", 0))
        else:
            skips_part.touch()
        start = ckpt.last_committed_record_index + 1
        result.resumed_from = ckpt.last_committed_record_index
        result.pairs = offsets.get("pair_count", 0)
        if result.filter_summary is not None:
            result.filter_summary = FilterSummary(**offsets.get("filter", {}))
        with open(skips_part, encoding="utf-8") as f:
            for entry_line in f:
                result.skips.add(SkipEntry(**json.loads(entry_line)))
        mode_flag = "ab"
        log.info("event=resume from_record=%d", start)
    else:
        mode_flag = "wb"
    out.parent.mkdir(parents=True, exist_ok=True)

    be = None
    if fmt == "txt_lines":
        be = backend or make_backend(cfg.backend)

    def candidates_for(block: list[tuple[int, SourceRecord]]) -> list[tuple[int, NBestRecord | SkipEntry]]:
        reqs = [
            TranslationRequest(r.text, cfg.source_lang, cfg.lang, cfg.n_samples, cfg.beam_size, request_id=r.id)
            for _, r in block
        ]
        got = fetch_batch(reqs, be, return_exceptions=True)
        out_block = []
        for (idx, r), cands in zip(block, got):
            if isinstance(cands, Exception):
                if not isinstance(cands, BackendError):
                    raise cands
                out_block.append((idx, SkipEntry(r.id, "backend_error", str(cands), idx)))
            else:
                out_block.append((idx, NBestRecord(r.id, tuple(cands), source=r.text, language=cfg.lang)))
        return out_block

    pool = multiprocessing.get_context("fork").Pool(workers) if workers > 1 else None
    fpairs = open(part, mode_flag)
    fskips = open(skips_part, mode_flag)
    records_done = start
    since_commit = 0
    try:
        stream = enumerate(read_records(manifest))
        stream = ((i, r) for i, r in stream if i >= start)
        for block in _blocks(stream, block_size):
            if fmt == "txt_lines":
                block = candidates_for(block)
            else:
                block = [(i, dataclasses.replace(r, candidates=r.candidates[: cfg.n_samples])) for i, r in block]
            tasks = [(i, r, cfg.bleu, mode, fp) for i, r in block if isinstance(r, NBestRecord)]
            if pool is not None:
                mined = iter(pool.map(_mine_task, tasks, chunksize=max(1, len(tasks) // (workers * 4))))
            else:
                mined = iter(map(_mine_task, tasks))
            for i, r in block:
                res = next(mined) if isinstance(r, NBestRecord) else r
                if isinstance(res, SkipEntry):
                    result.skips.add(res)
                    fskips.write(_skip_line(res).encode("utf-8"))
                elif _keep(res, cfg.filter, result.filter_summary):
                    fpairs.write(pair_to_line(res).encode("utf-8"))
                    result.pairs += 1
                records_done = i + 1
                since_commit += 1
                if since_commit >= every:
                    _commit(fpairs, fskips, ckpt_path, checksum, fp, records_done - 1, result)
                    since_commit = 0
                    log.info("event=progress records=%d pairs=%d skips=%d", records_done, result.pairs, len(result.skips))
                    if on_commit is not None:
                        on_commit(records_done, result.pairs)
    finally:
        fpairs.close()
        fskips.close()
        if pool is not None:
            pool.terminate()
        if be is not None and backend is None:
            be.close()

    os.replace(part, out)
    os.replace(skips_part, skips_path)
    ckpt_path.unlink(missing_ok=True)
    result.records = records_done
    result.manifest.record_count = result.pairs
    result.manifest.checksum = file_checksum(out)
    return result


def _keep(pair: ParaphrasePair, band: FilterRange | None, summary: FilterSummary | None) -> bool:
    if band is None:
        return True
    if pair.bleu < band.lo:
        summary.dropped_low += 1
        return False
    if pair.bleu > band.hi:
        summary.dropped_high += 1
        return False
    summary.kept += 1
    return True


def _commit(fpairs, fskips, ckpt_path, checksum, fp, last_index, result: MineResult) -> None:
    fpairs.flush()
    fskips.flush()
    os.fsync(fpairs.fileno())
    os.fsync(fskips.fileno())
    offsets = {"pairs": fpairs.tell(), "skips": fskips.tell(), "pair_count": result.pairs}
    if result.filter_summary is not None:
        offsets["filter"] = dataclasses.asdict(result.filter_summary)
    Checkpoint(checksum, fp, last_index, offsets).save(ckpt_path)


@dataclass
class ScoreIssue:
    pair_id: str
    field: str
    stored: float
    recomputed: float


def rescore_pair(pair: ParaphrasePair, cfg: PipelineConfig) -> ParaphrasePair:
    """Recompute BLEU and Jaccard from the pair's sentences."""
    mode = cfg.mode_for(pair.lang or None)
    ta = normalize(pair.sentence_a, mode).tokens
    tb = normalize(pair.sentence_b, mode).tokens
    order = cfg.bleu.max_ngram_order
    sa, sb = NgramStats(ta, order), NgramStats(tb, order)
    try:
        bleu = (bleu_from_stats(sa, sb, cfg.bleu).score + bleu_from_stats(sb, sa, cfg.bleu).score) / 2.0
    except EmptyPair:
        bleu = 0.0
    return dataclasses.replace(pair, bleu=bleu, jaccard=float(jaccard(ta, tb)))


def compare_scores(stored: ParaphrasePair, fresh: ParaphrasePair, tol: float = 1e-6) -> list[ScoreIssue]:
    issues = []
    for name in ("bleu", "jaccard"):
        a, b = getattr(stored, name), getattr(fresh, name)
        if abs(a - b) > tol:
            issues.append(ScoreIssue(stored.id, name, a, b))
    return issues


def roundtrip_pairs(
    records: Iterable[SourceRecord],
    cfg: PipelineConfig,
    pivot_lang: str,
    backend: Backend,
    *,
    block_size: int = 256,
) -> Iterator[tuple[SourceRecord, ParaphrasePair | Exception, object]]:
    """Yield ``(record, pair_or_error, roundtrip)`` for each source line."""
    from .gateway import RoundTrip

    fp = cfg.fingerprint()
    for block in _blocks(records, block_size):
        trips = round_trip_batch([(r.id, r.text) for r in block], pivot_lang, backend, source_lang=cfg.lang)
        for rec, trip in zip(block, trips):
            if not isinstance(trip, RoundTrip):
                yield rec, trip, None
                continue
            pair = ParaphrasePair(
                id=rec.id,
                sentence_a=rec.text,
                sentence_b=trip.paraphrase,
                index_a=0,
                index_b=1,
                bleu=0.0,
                jaccard=0.0,
                lang=cfg.lang,
                provenance=Provenance(source_id=rec.id, config_fp=fp),
            )
            yield rec, rescore_pair(pair, cfg), trip
