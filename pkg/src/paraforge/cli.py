"""``paraforge`` command line.

Subcommands: mine, filter, score, stats, compare, kappa, scatter, roundtrip.
Data goes to files or stdout; progress and errors go to stderr as
``key=value`` lines. Exit codes: 0 ok, 1 runtime failure, 2 bad input or
arguments, 3 strict validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from . import config as cfgmod
from .corpusio import AtomicWriter, CorpusManifest, guess_format, pair_to_line, read_records, write_pairs
from .errors import BackendError, CheckpointMismatch, ParaforgeError, SchemaViolation
from .gateway import BackendDescriptor
from .selection import FilterRange, FilterSummary, filter_pairs

log = logging.getLogger("paraforge")

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT, EXIT_STRICT = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _emit_error(kind: str, message: str, **extra) -> None:
    fields = {"level": "error", "error": kind, "message": message, **extra}
    sys.stderr.write(" ".join(f"{k}={json.dumps(v, ensure_ascii=False)}" for k, v in fields.items()) + "\n")


def _readable(path: str | None, flag: str = "--input") -> Path:
    if not path:
        raise UsageError(f"{flag} is required")
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(str(p))
    return p


def _load_config(args) -> cfgmod.PipelineConfig:
    cfg = cfgmod.load(getattr(args, "config", None))
    changes = {
        "lang": getattr(args, "lang", None),
        "mode": getattr(args, "mode", None),
        "n_samples": getattr(args, "n_samples", None),
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "checkpoint_every": getattr(args, "checkpoint_every", None),
        "bleu.smoothing": getattr(args, "smoothing", None),
        "semsim.endpoint": getattr(args, "embed_endpoint", None),
        "semsim.batch_size": getattr(args, "batch_size", None),
    }
    if getattr(args, "backend", None) or getattr(args, "endpoint", None) or getattr(args, "nbest", None):
        b = cfg.backend
        kind = args.backend or b.kind
        cfg = cfgmod.override(
            cfg,
            backend=BackendDescriptor(
                kind=kind,
                endpoint=args.endpoint or b.endpoint,
                path=getattr(args, "nbest", None) or b.path,
                timeout_ms=b.timeout_ms,
                max_attempts=b.max_attempts,
                backoff_s=b.backoff_s,
                max_in_flight=b.max_in_flight,
                mock=getattr(args, "mock", None) or b.mock,
            ),
        )
    elif getattr(args, "mock", None):
        changes["backend.mock"] = args.mock
    lo, hi = getattr(args, "lo", None), getattr(args, "hi", None)
    if lo is not None or hi is not None:
        changes["filter.lo"] = lo if lo is not None else 0.0
        changes["filter.hi"] = hi if hi is not None else 100.0
    return cfgmod.override(cfg, **changes)


def _print_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, ensure_ascii=False, sort_keys=False) + "\n")


def _read_pairs(path) -> list:
    return list(read_records(CorpusManifest(str(path), "pairs_jsonl")))


def _attach_manual(pairs, annotations_path):
    import dataclasses

    from .stats import mean_likert_by_pair

    if not annotations_path:
        return pairs
    means = mean_likert_by_pair(read_records(CorpusManifest(str(_readable(annotations_path, "--annotations")), "annotations_csv")))
    return [dataclasses.replace(p, manual=means.get(p.id, p.manual)) for p in pairs]


def cmd_mine(args) -> int:
    from .pipeline import run_mine

    src = _readable(args.input)
    cfg = _load_config(args)
    res = run_mine(
        cfg,
        src,
        args.output,
        input_format=args.input_format,
        workers=cfg.workers,
        resume=args.resume,
    )
    summary = {
        "output": str(args.output),
        "records": res.records,
        "pairs": res.pairs,
        "skipped": len(res.skips),
        "skip_reasons": res.skips.counts(),
        "config_fp": cfg.fingerprint(),
        "checksum": res.manifest.checksum,
    }
    if res.filter_summary is not None:
        summary["filter"] = vars(res.filter_summary)
    _print_json(summary)
    return EXIT_OK


def cmd_filter(args) -> int:
    src = _readable(args.input)
    band = FilterRange(args.lo, args.hi)
    summary = FilterSummary()
    pairs = read_records(CorpusManifest(str(src), "pairs_jsonl"))
    write_pairs(filter_pairs(pairs, band, summary), args.output)
    _print_json({"range": str(band), "kept": summary.kept, "dropped_low": summary.dropped_low, "dropped_high": summary.dropped_high})
    return EXIT_OK


def cmd_score(args) -> int:
    from .pipeline import compare_scores, rescore_pair

    src = _readable(args.input)
    cfg = _load_config(args)
    fp = cfg.fingerprint()
    stored = _read_pairs(src)
    fresh, issues = [], []
    fp_mismatch = 0
    for p in stored:
        q = rescore_pair(p, cfg)
        issues.extend(compare_scores(p, q))
        if p.provenance.config_fp and p.provenance.config_fp != fp:
            fp_mismatch += 1
        fresh.append(q)
    failures = None
    if args.with_semsim:
        from .semsim import HttpEmbedder, ScoringFailures, score_pairs

        if not cfg.semsim.endpoint:
            raise UsageError("--with-semsim needs semsim.endpoint (config) or --embed-endpoint")
        emb = HttpEmbedder(cfg.semsim.endpoint, timeout_ms=cfg.semsim.timeout_ms,
                           max_attempts=cfg.semsim.max_attempts, max_in_flight=cfg.semsim.max_in_flight)
        failures = ScoringFailures()
        try:
            fresh = list(score_pairs(fresh, emb, batch_size=cfg.semsim.batch_size, failures=failures))
        finally:
            emb.close()
    for issue in issues:
        log.warning("event=score_mismatch pair=%s field=%s stored=%r recomputed=%r",
                    issue.pair_id, issue.field, issue.stored, issue.recomputed)
    if args.output:
        write_pairs(fresh, args.output)
    _print_json({
        "pairs": len(fresh),
        "mismatches": len(issues),
        "config_fp_mismatches": fp_mismatch,
        "semsim_failures": len(failures.pair_ids) if failures else 0,
    })
    if issues and args.strict:
        return EXIT_STRICT
    return EXIT_OK


def cmd_stats(args) -> int:
    from .stats import aggregate, correlation_matrix

    pairs = _attach_manual(_read_pairs(_readable(args.input)), args.annotations)
    report = aggregate(pairs, label=args.label or Path(args.input).stem)
    if args.format == "tsv":
        text = report.to_tsv()
    else:
        d = report.rounded()
        if args.correlations:
            d["spearman"] = correlation_matrix(pairs)
        text = json.dumps(d, ensure_ascii=False) + "\n"
    if args.output:
        with AtomicWriter(args.output) as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    from .stats import aggregate, comparison_table

    labels = args.labels or [Path(p).stem for p in args.inputs]
    if len(labels) != len(args.inputs):
        raise UsageError("--labels must match the number of inputs")
    reports = []
    for path, label in zip(args.inputs, labels):
        pairs = _attach_manual(_read_pairs(_readable(path)), None)
        reports.append(aggregate(pairs, label=label))
    sys.stdout.write(comparison_table(reports))
    return EXIT_OK


def cmd_kappa(args) -> int:
    from .stats import weighted_kappa

    recs = list(read_records(CorpusManifest(str(_readable(args.annotations, "--annotations")), "annotations_csv")))
    by_annot: dict[str, dict[str, int]] = {}
    for r in recs:
        by_annot.setdefault(r.annotator_id, {})[r.pair_id] = r.score
    annotators = args.annotators or list(by_annot)[:2]
    if len(annotators) != 2 or any(a not in by_annot for a in annotators):
        raise UsageError(f"need exactly two known annotators; found {sorted(by_annot)}")
    a, b = (by_annot[x] for x in annotators)
    shared = [pid for pid in a if pid in b]
    value = weighted_kappa([a[p] for p in shared], [b[p] for p in shared], weights=args.weights)
    sys.stdout.write(f"{value:.3f}\n")
    log.info("event=kappa annotators=%s,%s items=%d weights=%s", annotators[0], annotators[1], len(shared), args.weights)
    return EXIT_OK


def cmd_scatter(args) -> int:
    from .stats import export_scatter, scatter_csv

    pairs = _attach_manual(_read_pairs(_readable(args.input)), args.annotations)
    rows = export_scatter(pairs, args.x, args.y, sigma_x=args.sigma_x, sigma_y=args.sigma_y,
                          seed=args.seed, label=args.label)
    text = scatter_csv(rows)
    if args.output:
        with AtomicWriter(args.output) as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_roundtrip(args) -> int:
    from .gateway import make_backend
    from .pipeline import roundtrip_pairs

    src = _readable(args.input)
    cfg = _load_config(args)
    backend = make_backend(cfg.backend)
    records = read_records(CorpusManifest(str(src), "txt_lines", cfg.lang))
    failures = 0
    audit = None
    try:
        with AtomicWriter(args.output) as f:
            if args.audit:
                audit = open(args.audit, "w", encoding="utf-8")
            for rec, pair, trip in roundtrip_pairs(records, cfg, args.pivot, backend):
                if isinstance(pair, Exception):
                    failures += 1
                    _emit_error("backend", str(pair), record=rec.id, leg=getattr(pair, "leg", ""))
                    if not args.continue_on_error:
                        raise pair
                    continue
                f.write(pair_to_line(pair))
                if audit is not None:
                    audit.write(json.dumps({"id": rec.id, "source": trip.source, "pivot": trip.pivot,
                                            "pivot_lang": trip.pivot_lang, "paraphrase": trip.paraphrase},
                                           ensure_ascii=False) + "\n")
    finally:
        if audit is not None:
            audit.close()
        backend.close()
    _print_json({"output": str(args.output), "failures": failures})
    return EXIT_OK


def _band_value(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 100.0:
        raise argparse.ArgumentTypeError(f"{text} is outside [0, 100]")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paraforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="YAML/JSON config file; flags override its keys")
            p.add_argument("--lang", help="language tag of the paraphrases")
            p.add_argument("--mode", choices=["word", "char"], help="tokenization mode")
            p.add_argument("--smoothing", choices=["none", "floor", "add_k", "exp"])

    def backend_flags(p):
        p.add_argument("--backend", choices=["file", "http", "mock"])
        p.add_argument("--endpoint", help="translation service URL (http backend)")
        p.add_argument("--nbest", help="N-best file for the file backend")
        p.add_argument("--mock", choices=["identity", "variants"], help="mock backend behaviour")

    p = sub.add_parser("mine", help="select the most diverse candidate pair per sentence")
    common(p)
    backend_flags(p)
    p.add_argument("--input", required=True)
    p.add_argument("--input-format", choices=["txt_lines", "nbest_tsv", "nbest_jsonl"])
    p.add_argument("--output", required=True)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--lo", type=_band_value)
    p.add_argument("--hi", type=_band_value)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--resume", action="store_true", help="continue from <output>.ckpt if present")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("filter", help="keep pairs with lo <= BLEU <= hi")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--lo", type=_band_value, default=0.0)
    p.add_argument("--hi", type=_band_value, default=100.0)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("score", help="recompute BLEU/Jaccard, optionally add cosine similarity")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--with-semsim", action="store_true")
    p.add_argument("--embed-endpoint")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--strict", action="store_true", help="exit 3 when stored scores disagree")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stats", help="corpus means (and Spearman matrix)")
    p.add_argument("--input", required=True)
    p.add_argument("--annotations", help="annotations CSV to fill manual scores")
    p.add_argument("--label")
    p.add_argument("--format", choices=["json", "tsv"], default="json")
    p.add_argument("--correlations", action="store_true")
    p.add_argument("--output")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("compare", help="side-by-side table of several corpora")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--labels", nargs="+")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("kappa", help="weighted kappa between two annotators")
    p.add_argument("--annotations", required=True)
    p.add_argument("--weights", choices=["linear", "quadratic"], default="linear")
    p.add_argument("--annotators", nargs=2)
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("scatter", help="jittered metric-vs-metric CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma-x", type=float, default=0.1)
    p.add_argument("--sigma-y", type=float, default=0.05)
    p.add_argument("--label")
    p.add_argument("--annotations")
    p.add_argument("--output")
    p.set_defaults(func=cmd_scatter)

    p = sub.add_parser("roundtrip", help="round-trip MT baseline through a pivot language")
    common(p)
    backend_flags(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--pivot", required=True, help="pivot language tag")
    p.add_argument("--audit", help="JSONL file with the intermediate pivot translations")
    p.add_argument("--continue-on-error", action="store_true")
    p.set_defaults(func=cmd_roundtrip)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "lo", None) is not None and getattr(args, "hi", None) is not None and args.lo > args.hi:
        parser.print_usage(sys.stderr)
        _emit_error("usage", f"--lo {args.lo:g} is greater than --hi {args.hi:g}")
        return EXIT_INPUT
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="ts=%(asctime)s level=%(levelname)s logger=%(name)s %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return EXIT_INPUT
    except FileNotFoundError as exc:
        _emit_error("input", "file not found or unreadable", path=str(exc.filename or exc.args[0]))
        return EXIT_INPUT
    except (SchemaViolation, CheckpointMismatch) as exc:
        _emit_error(type(exc).__name__, str(exc), path=getattr(exc, "path", None))
        return EXIT_INPUT
    except ValueError as exc:
        _emit_error("input", str(exc))
        return EXIT_INPUT
    except (BackendError, ParaforgeError, OSError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
