import json

import pytest

from paraforge.cli import main
from paraforge.corpusio import CorpusManifest, read_records, write_annotations, write_nbest_tsv, write_pairs
from paraforge.gateway import token_deletion_variants
from paraforge.selection import NBestRecord, ParaphrasePair, Provenance
from paraforge.stats import AnnotationRecord


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_pairs(path):
    return list(read_records(CorpusManifest(str(path), "pairs_jsonl")))


@pytest.fixture
def src(tmp_path):
    f = tmp_path / "in.txt"
    f.write_text("The cat sat on the mat.\nA quick brown fox jumps over it.\nHello there, world.\n", encoding="utf-8")
    return f


def test_mine_mock(tmp_path, capsys, src):
    out = tmp_path / "pairs.jsonl"
    code, stdout, _ = run(capsys, "mine", "--input", src, "--output", out, "--backend", "mock", "--mock", "variants", "--workers", 1)
    assert code == 0
    pairs = read_pairs(out)
    assert [p.id for p in pairs] == ["1", "2", "3"]
    summary = json.loads(stdout)
    assert summary["pairs"] == 3 and summary["skipped"] == 0
    assert all(p.provenance.config_fp == summary["config_fp"] for p in pairs)


def test_mine_file_equals_mock(tmp_path, capsys, src):
    lines = src.read_text(encoding="utf-8").splitlines()
    nbest = tmp_path / "n.tsv"
    write_nbest_tsv([NBestRecord(str(i + 1), tuple(token_deletion_variants(t)[:8])) for i, t in enumerate(lines)], nbest)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run(capsys, "mine", "--input", src, "--output", a, "--backend", "mock", "--mock", "variants")[0] == 0
    assert run(capsys, "mine", "--input", nbest, "--output", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.jsonl"
    assert run(capsys, "mine", "--input", src, "--output", c, "--backend", "file", "--nbest", nbest)[0] == 0
    assert a.read_bytes() == c.read_bytes()


def test_mine_unreadable_input(tmp_path, capsys):
    code, _, err = run(capsys, "mine", "--input", tmp_path / "nope.txt", "--output", tmp_path / "o.jsonl")
    assert code == 2
    assert "nope.txt" in err


def test_mine_schema_violation_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("only two\tfields\n", encoding="utf-8")
    code, _, err = run(capsys, "mine", "--input", bad, "--output", tmp_path / "o.jsonl")
    assert code == 2 and "bad.tsv:1" in err


def _pairs_file(path, bleus):
    write_pairs([ParaphrasePair(str(i), "a b", "c d", 0, 1, float(b), 0.0) for i, b in enumerate(bleus)], path)
    return path


def test_filter(tmp_path, capsys):
    src = _pairs_file(tmp_path / "p.jsonl", [10, 50, 90])
    out = tmp_path / "f.jsonl"
    code, stdout, _ = run(capsys, "filter", "--input", src, "--output", out, "--lo", 20, "--hi", 80)
    assert code == 0
    assert [p.bleu for p in read_pairs(out)] == [50]
    assert json.loads(stdout) == {"range": "20-80", "kept": 1, "dropped_low": 1, "dropped_high": 1}
    out2 = tmp_path / "g.jsonl"
    assert run(capsys, "filter", "--input", src, "--output", out2, "--lo", 0, "--hi", 100)[0] == 0
    assert out2.read_bytes() == src.read_bytes()


def test_filter_bad_band_before_io(tmp_path, capsys):
    code, _, err = run(capsys, "filter", "--input", tmp_path / "missing.jsonl", "--output", tmp_path / "o", "--lo", 60, "--hi", 20)
    assert code == 2
    assert "greater than" in err
    assert not (tmp_path / "o").exists()


def test_filter_out_of_range_value(capsys):
    assert run(capsys, "filter", "--input", "x", "--output", "y", "--lo", 120)[0] == 2


def test_score_strict(tmp_path, capsys, caplog, src):
    mined = tmp_path / "m.jsonl"
    run(capsys, "mine", "--input", src, "--output", mined, "--backend", "mock", "--mock", "variants")
    code, stdout, _ = run(capsys, "score", "--input", mined, "--strict")
    assert code == 0 and json.loads(stdout)["mismatches"] == 0
    tampered = tmp_path / "t.jsonl"
    pairs = read_pairs(mined)
    import dataclasses
    write_pairs([dataclasses.replace(pairs[0], bleu=pairs[0].bleu + 1)] + pairs[1:], tampered)
    code, stdout, _ = run(capsys, "score", "--input", tampered, "--strict")
    assert code == 3 and json.loads(stdout)["mismatches"] == 1
    assert "event=score_mismatch pair=1 field=bleu" in caplog.text
    code, _, _ = run(capsys, "score", "--input", tampered)
    assert code == 0


def test_score_writes_recomputed(tmp_path, capsys):
    src = tmp_path / "p.jsonl"
    write_pairs([ParaphrasePair("x", "A b c d.", "a b c d", 0, 1, 0.0, 0.0)], src)
    out = tmp_path / "o.jsonl"
    assert run(capsys, "score", "--input", src, "--output", out)[0] == 0
    [p] = read_pairs(out)
    assert p.bleu == 100.0 and p.jaccard == 1.0


def test_score_semsim_requires_endpoint(tmp_path, capsys):
    src = _pairs_file(tmp_path / "p.jsonl", [10])
    assert run(capsys, "score", "--input", src, "--with-semsim")[0] == 2


def test_stats_and_compare(tmp_path, capsys):
    a = _pairs_file(tmp_path / "ours.jsonl", [20, 40])
    code, stdout, _ = run(capsys, "stats", "--input", a)
    assert code == 0 and json.loads(stdout)["mean_bleu"] == 30.0
    code, stdout, _ = run(capsys, "stats", "--input", a, "--format", "tsv")
    assert code == 0 and "mean_bleu" in stdout
    b = _pairs_file(tmp_path / "theirs.jsonl", [10])
    code, stdout, _ = run(capsys, "compare", a, b, "--labels", "Ours", "ParaBank2")
    rows = [[c.strip() for c in line.split("\t")] for line in stdout.splitlines()]
    assert rows[0] == ["Dataset", "Manual", "Cosine", "BLEU", "Jaccard"]
    assert rows[1][0] == "Ours" and rows[1][3] == "30.0"
    assert rows[2][0] == "ParaBank2" and rows[2][3] == "10.0"


def test_stats_with_annotations(tmp_path, capsys):
    a = _pairs_file(tmp_path / "ours.jsonl", [20, 40, 60])
    ann = tmp_path / "a.csv"
    write_annotations([AnnotationRecord("0", "x", 3), AnnotationRecord("0", "y", 2),
                       AnnotationRecord("1", "x", 3), AnnotationRecord("2", "x", 1)], ann)
    code, stdout, _ = run(capsys, "stats", "--input", a, "--annotations", ann, "--correlations")
    d = json.loads(stdout)
    # pair means 2.5, 3, 1 -> scaled 75, 100, 0 -> mean 58.3
    assert d["mean_manual_scaled"] == 58.3
    assert d["spearman"]["bleu"]["jaccard"] is None


def test_kappa(tmp_path, capsys):
    ann = tmp_path / "a.csv"
    scores = [1, 2, 3, 3, 2]
    write_annotations([AnnotationRecord(str(i), who, s) for who in ("A", "B") for i, s in enumerate(scores)], ann)
    code, stdout, _ = run(capsys, "kappa", "--annotations", ann)
    assert code == 0 and stdout == "1.000\n"
    code, _, _ = run(capsys, "kappa", "--annotations", ann, "--annotators", "A", "Z")
    assert code == 2


def test_scatter_deterministic(tmp_path, capsys):
    src = tmp_path / "p.jsonl"
    write_pairs([ParaphrasePair(str(i), "a", "b", 0, 1, float(i), i / 20) for i in range(20)], src)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "scatter", "--input", src, "--x", "bleu", "--y", "jaccard", "--seed", 7, "--output", a)
    run(capsys, "scatter", "--input", src, "--x", "bleu", "--y", "jaccard", "--seed", 7, "--output", b)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "x,y,label"
    assert run(capsys, "scatter", "--input", src, "--x", "bleu", "--y", "meteor")[0] == 1


def test_roundtrip_identity(tmp_path, capsys, src):
    out, audit = tmp_path / "rt.jsonl", tmp_path / "audit.jsonl"
    code, _, _ = run(capsys, "roundtrip", "--input", src, "--output", out, "--pivot", "de",
                     "--backend", "mock", "--mock", "identity", "--audit", audit)
    assert code == 0
    pairs = read_pairs(out)
    assert len(pairs) == 3
    for p in pairs:
        assert p.sentence_a == p.sentence_b and p.bleu == 100.0 and p.jaccard == 1.0
    assert len(audit.read_text().splitlines()) == 3


def test_roundtrip_backend_error(tmp_path, capsys, src):
    out = tmp_path / "rt.jsonl"
    code, _, err = run(capsys, "roundtrip", "--input", src, "--output", out, "--pivot", "de",
                       "--backend", "http", "--endpoint", "http://127.0.0.1:9/none", "--config", _fast_cfg(tmp_path))
    assert code == 1 and "forward" in err
    assert not out.exists()
    code, stdout, _ = run(capsys, "roundtrip", "--input", src, "--output", out, "--pivot", "de", "--continue-on-error",
                          "--backend", "http", "--endpoint", "http://127.0.0.1:9/none", "--config", _fast_cfg(tmp_path))
    assert code == 0 and json.loads(stdout)["failures"] == 3
    assert read_pairs(out) == []


def _fast_cfg(tmp_path):
    f = tmp_path / "fast.yaml"
    f.write_text("backend: {kind: http, endpoint: 'http://127.0.0.1:9/none', max_attempts: 1, backoff_s: 0, timeout_ms: 500}\n", encoding="utf-8")
    return f


def test_python_dash_m(tmp_path, src):
    import subprocess
    import sys

    out = tmp_path / "p.jsonl"
    r = subprocess.run([sys.executable, "-m", "paraforge", "mine", "--input", str(src), "--output", str(out), "--mock", "variants"],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "event=" not in r.stdout
