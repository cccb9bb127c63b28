"""Streaming readers and writers for every corpus file format.

Formats (UTF-8, ``\\n``-terminated, BOM stripped on read):

``txt_lines``
    One source sentence per line; blank lines are skipped, ids are
    1-based line numbers.
``nbest_tsv``
    ``record_id<TAB>rank<TAB>hypothesis``; lines of a record are contiguous.
``nbest_jsonl``
    ``{"id", "candidates": [...], "source"?, "lang"?}`` per line.
``pairs_jsonl``
    One paraphrase pair per line, keys in a fixed order (see
    :func:`pair_to_dict`).
``annotations_csv``
    Header ``pair_id,annotator_id,score``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import CheckpointMismatch, EncodingError, SchemaViolation
from .selection import NBestRecord, ParaphrasePair, Provenance
from .stats import AnnotationRecord

FORMATS = ("txt_lines", "nbest_tsv", "nbest_jsonl", "pairs_jsonl", "annotations_csv")
PAIR_KEYS = ("id", "lang", "sentence_a", "sentence_b", "index_a", "index_b", "bleu", "jaccard", "cosine", "manual", "provenance")


@dataclass(frozen=True)
class SourceRecord:
    id: str
    text: str
    line: int


@dataclass
class CorpusManifest:
    path: str
    format: str
    language: str = ""
    record_count: int | None = None
    checksum: str | None = None

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"unknown corpus format {self.format!r}; expected one of {FORMATS}")

    def to_dict(self) -> dict:
        return asdict(self)


def file_checksum(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return "sha256:" + h.hexdigest()


def guess_format(path: str | os.PathLike, default: str = "txt_lines") -> str:
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix == ".tsv":
        return "nbest_tsv"
    if suffix == ".csv":
        return "annotations_csv"
    if suffix == ".jsonl":
        try:
            with open(p, encoding="utf-8-sig") as f:
                for line in f:
                    if line.strip():
                        obj = json.loads(line)
                        return "nbest_jsonl" if "candidates" in obj else "pairs_jsonl"
        except (OSError, ValueError):
            pass
        return "pairs_jsonl"
    return default


def _lines(path: str) -> Iterator[tuple[int, str]]:
    with open(path, "rb") as f:
        for lineno, raw in enumerate(f, start=1):
            if lineno == 1 and raw.startswith(b"\xef\xbb\xbf"):
                raw = raw[3:]
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise EncodingError(f"invalid UTF-8: {exc.reason}", path, lineno) from None
            yield lineno, text.rstrip("\n").rstrip("\r")


def _json_line(path: str, lineno: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except ValueError as exc:
        raise SchemaViolation(f"invalid JSON: {exc}", path, lineno) from None
    if not isinstance(obj, dict):
        raise SchemaViolation("expected a JSON object", path, lineno)
    return obj


def _read_txt(m: CorpusManifest) -> Iterator[SourceRecord]:
    for lineno, line in _lines(m.path):
        if line.strip():
            yield SourceRecord(str(lineno), line, lineno)


def _read_nbest_tsv(m: CorpusManifest) -> Iterator[NBestRecord]:
    current: str | None = None
    group: list[tuple[int, str]] = []

    def flush():
        ranks = [r for r, _ in group]
        if len(set(ranks)) != len(ranks):
            raise SchemaViolation(f"duplicate rank in record {current!r}", m.path, start)
        return NBestRecord(current, tuple(h for _, h in sorted(group)), language=m.language)

    start = 0
    for lineno, line in _lines(m.path):
        if not line.strip():
            continue
        parts = line.split("\t", 2)
        if len(parts) != 3:
            raise SchemaViolation("expected 3 tab-separated fields: record_id, rank, hypothesis", m.path, lineno)
        rid, rank_s, hyp = parts
        try:
            rank = int(rank_s)
        except ValueError:
            raise SchemaViolation(f"rank is not an integer: {rank_s!r}", m.path, lineno) from None
        if rid != current:
            if current is not None:
                yield flush()
            current, group, start = rid, [], lineno
        group.append((rank, hyp))
    if current is not None:
        yield flush()


def _str_field(obj: dict, key: str, path: str, lineno: int, required: bool = True) -> str:
    if key not in obj:
        if required:
            raise SchemaViolation(f"missing field {key!r}", path, lineno)
        return ""
    v = obj[key]
    if not isinstance(v, str):
        raise SchemaViolation(f"field {key!r} must be a string", path, lineno)
    return v


def _num_field(obj: dict, key: str, path: str, lineno: int, required: bool = True, integer: bool = False):
    if key not in obj or obj[key] is None:
        if required:
            raise SchemaViolation(f"missing field {key!r}", path, lineno)
        return None
    v = obj[key]
    ok = isinstance(v, int) if integer else isinstance(v, (int, float))
    if not ok or isinstance(v, bool):
        kind = "an integer" if integer else "a number"
        raise SchemaViolation(f"field {key!r} must be {kind}", path, lineno)
    return v if integer else float(v)


def _read_nbest_jsonl(m: CorpusManifest) -> Iterator[NBestRecord]:
    for lineno, line in _lines(m.path):
        if not line.strip():
            continue
        obj = _json_line(m.path, lineno, line)
        rid = obj.get("id")
        if isinstance(rid, int) and not isinstance(rid, bool):
            rid = str(rid)
        if not isinstance(rid, str):
            raise SchemaViolation("missing or non-string field 'id'", m.path, lineno)
        cands = obj.get("candidates")
        if not isinstance(cands, list) or not all(isinstance(c, str) for c in cands):
            raise SchemaViolation("field 'candidates' must be a list of strings", m.path, lineno)
        yield NBestRecord(
            rid,
            tuple(cands),
            source=_str_field(obj, "source", m.path, lineno, required=False),
            language=_str_field(obj, "lang", m.path, lineno, required=False) or m.language,
        )


def pair_from_dict(obj: dict, path: str = "<dict>", lineno: int | None = None) -> ParaphrasePair:
    prov = obj.get("provenance", {})
    if not isinstance(prov, dict):
        raise SchemaViolation("field 'provenance' must be an object", path, lineno)
    try:
        return ParaphrasePair(
            id=_str_field(obj, "id", path, lineno),
            lang=_str_field(obj, "lang", path, lineno, required=False),
            sentence_a=_str_field(obj, "sentence_a", path, lineno),
            sentence_b=_str_field(obj, "sentence_b", path, lineno),
            index_a=_num_field(obj, "index_a", path, lineno, integer=True),
            index_b=_num_field(obj, "index_b", path, lineno, integer=True),
            bleu=_num_field(obj, "bleu", path, lineno),
            jaccard=_num_field(obj, "jaccard", path, lineno),
            cosine=_num_field(obj, "cosine", path, lineno, required=False),
            manual=_num_field(obj, "manual", path, lineno, required=False),
            provenance=Provenance(
                source_id=_str_field(prov, "source_id", path, lineno, required=False),
                config_fp=_str_field(prov, "config_fp", path, lineno, required=False),
            ),
        )
    except ValueError as exc:
        if isinstance(exc, SchemaViolation):
            raise
        raise SchemaViolation(str(exc), path, lineno) from None


def pair_to_dict(pair: ParaphrasePair) -> dict[str, Any]:
    d: dict[str, Any] = {
        "id": pair.id,
        "lang": pair.lang,
        "sentence_a": pair.sentence_a,
        "sentence_b": pair.sentence_b,
        "index_a": pair.index_a,
        "index_b": pair.index_b,
        "bleu": pair.bleu,
        "jaccard": pair.jaccard,
    }
    if pair.cosine is not None:
        d["cosine"] = pair.cosine
    if pair.manual is not None:
        d["manual"] = pair.manual
    d["provenance"] = {"source_id": pair.provenance.source_id, "config_fp": pair.provenance.config_fp}
    return d


def pair_to_line(pair: ParaphrasePair) -> str:
    return json.dumps(pair_to_dict(pair), ensure_ascii=False) + "\n"


def _read_pairs(m: CorpusManifest) -> Iterator[ParaphrasePair]:
    for lineno, line in _lines(m.path):
        if line.strip():
            yield pair_from_dict(_json_line(m.path, lineno, line), m.path, lineno)


def _read_annotations(m: CorpusManifest) -> Iterator[AnnotationRecord]:
    header_seen = False
    for lineno, line in _lines(m.path):
        if not line.strip():
            continue
        row = next(csv.reader([line]))
        if not header_seen:
            if [c.strip() for c in row] != ["pair_id", "annotator_id", "score"]:
                raise SchemaViolation("header must be pair_id,annotator_id,score", m.path, lineno)
            header_seen = True
            continue
        if len(row) != 3:
            raise SchemaViolation(f"expected 3 columns, got {len(row)}", m.path, lineno)
        try:
            score = int(row[2])
            yield AnnotationRecord(row[0], row[1], score)
        except ValueError as exc:
            raise SchemaViolation(f"bad score {row[2]!r}: {exc}", m.path, lineno) from None


_READERS = {
    "txt_lines": _read_txt,
    "nbest_tsv": _read_nbest_tsv,
    "nbest_jsonl": _read_nbest_jsonl,
    "pairs_jsonl": _read_pairs,
    "annotations_csv": _read_annotations,
}


def read_records(manifest: CorpusManifest) -> Iterator:
    """Stream typed records from ``manifest.path`` with bounded memory.

    Raises :class:`SchemaViolation` (or its subclass
    :class:`EncodingError`) naming the offending line.
    """
    return _READERS[manifest.format](manifest)


def scan(path: str | os.PathLike, fmt: str | None = None, language: str = "") -> CorpusManifest:
    """Manifest with ``record_count`` and ``checksum`` filled in."""
    fmt = fmt or guess_format(path)
    m = CorpusManifest(str(path), fmt, language)
    m.record_count = sum(1 for _ in read_records(m))
    m.checksum = file_checksum(path)
    return m


class AtomicWriter:
    """Write to ``<path>.part`` and rename into place on success only."""

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self.tmp = self.path.with_name(self.path.name + ".part")

    def __enter__(self) -> io.TextIOWrapper:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.f = open(self.tmp, "w", encoding="utf-8", newline="\n")
        return self.f

    def __exit__(self, exc_type, exc, tb):
        self.f.close()
        if exc_type is None:
            os.replace(self.tmp, self.path)
        else:
            self.tmp.unlink(missing_ok=True)
        return False


def write_pairs(pairs: Iterable[ParaphrasePair], path: str | os.PathLike, language: str = "") -> CorpusManifest:
    count = 0
    with AtomicWriter(path) as f:
        for p in pairs:
            f.write(pair_to_line(p))
            count += 1
    return CorpusManifest(str(path), "pairs_jsonl", language, count, file_checksum(path))


def write_nbest_tsv(records: Iterable[NBestRecord], path: str | os.PathLike) -> CorpusManifest:
    count = 0
    with AtomicWriter(path) as f:
        for rec in records:
            for rank, hyp in enumerate(rec.candidates):
                if "\n" in hyp or "\t" in rec.id:
                    raise ValueError(f"record {rec.id!r} cannot be represented in TSV")
                f.write(f"{rec.id}\t{rank}\t{hyp}\n")
            count += 1
    return CorpusManifest(str(path), "nbest_tsv", "", count, file_checksum(path))


def write_annotations(records: Iterable[AnnotationRecord], path: str | os.PathLike) -> CorpusManifest:
    count = 0
    with AtomicWriter(path) as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["pair_id", "annotator_id", "score"])
        for r in records:
            w.writerow([r.pair_id, r.annotator_id, r.score])
            count += 1
    return CorpusManifest(str(path), "annotations_csv", "", count, file_checksum(path))


@dataclass
class Checkpoint:
    """Progress marker for a resumable run.

    ``last_committed_record_index`` is -1 before any record is committed;
    ``offsets`` holds byte lengths of each output file at commit time.
    """

    manifest_checksum: str
    config_fp: str
    last_committed_record_index: int = -1
    offsets: dict[str, int] | None = None

    def save(self, path: str | os.PathLike) -> None:
        with AtomicWriter(path) as f:
            json.dump(asdict(self), f, sort_keys=True)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Checkpoint":
        with open(path, encoding="utf-8") as f:
            return cls(**json.load(f))

    def check(self, manifest_checksum: str, config_fp: str) -> None:
        if self.config_fp != config_fp:
            raise CheckpointMismatch(f"checkpoint config {self.config_fp} differs from current {config_fp}")
        if self.manifest_checksum != manifest_checksum:
            raise CheckpointMismatch("checkpoint was written for a different input file")
