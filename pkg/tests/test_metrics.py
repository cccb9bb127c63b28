import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import oracle_bleu, oracle_symmetric
from paraforge.errors import EmptyPair
from paraforge.metrics import BleuConfig, jaccard, sentence_bleu, symmetric_bleu
from paraforge.textnorm import normalize

tokens_st = st.lists(st.sampled_from("a b c d e f".split()), min_size=1, max_size=12)


def test_identical_sentences_score_100():
    s = normalize("the cat sat on the mat")
    b = sentence_bleu(s, s)
    assert b.score == 100.0
    assert b.precisions == (1.0, 1.0, 1.0, 1.0)
    assert b.brevity_penalty == 1.0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_identical_short_sentences_score_100(n):
    toks = ["w%d" % i for i in range(n)]
    assert sentence_bleu(toks, toks).score == 100.0
    assert symmetric_bleu(toks, toks) == 100.0


def test_disjoint_without_smoothing_is_zero():
    cfg = BleuConfig(smoothing="none")
    assert sentence_bleu("a b c d".split(), "w x y z".split(), cfg).score == 0.0


def test_brevity_penalty_hand_count():
    # Hand count: every n-gram of the hypothesis is in the reference,
    # so precisions are 4/4, 3/3, 2/2, 1/1 and BP = exp(1 - 5/4).
    b = sentence_bleu(list("abcd"), list("abcde"))
    assert b.precisions == (1.0, 1.0, 1.0, 1.0)
    assert b.matches == (4, 3, 2, 1)
    assert b.brevity_penalty == pytest.approx(math.exp(-0.25), abs=1e-12)
    assert b.score == pytest.approx(77.88007830714049, abs=1e-9)


def test_clipped_unigram_precision():
    b = sentence_bleu(["a", "a", "a"], ["a", "b"])
    assert b.precisions[0] == pytest.approx(1 / 3)
    assert b.matches[0] == 1


def test_empty_pair_raises():
    with pytest.raises(EmptyPair):
        sentence_bleu([], [])
    with pytest.raises(EmptyPair):
        symmetric_bleu([], [])


def test_empty_hypothesis_is_degenerate_zero():
    b = sentence_bleu([], ["a", "b"])
    assert b.score == 0.0 and b.degenerate


def test_score_matches_breakdown_formula():
    b = sentence_bleu("a b c x d".split(), "a b c d e f".split())
    gm = math.exp(sum(math.log(p) for p in b.smoothed) / 4)
    assert b.score == pytest.approx(100 * b.brevity_penalty * gm, rel=1e-12)


@pytest.mark.parametrize("smoothing", ["exp", "floor", "add_k", "none"])
def test_against_bruteforce_oracle(smoothing):
    rng = random.Random(1234)
    cfg = BleuConfig(smoothing=smoothing)
    vocab = "a b c d e".split()
    for _ in range(1000):
        h = [rng.choice(vocab) for _ in range(rng.randint(0, 12))]
        r = [rng.choice(vocab) for _ in range(rng.randint(0, 12))]
        if not h and not r:
            continue
        want = oracle_bleu(h, r, smoothing=smoothing)
        assert sentence_bleu(h, r, cfg).score == pytest.approx(want, abs=1e-9)


def test_table1_bleu_exact_to_printed_precision(reference_pairs):
    # Exponential smoothing on normalized tokens reproduces the printed column.
    for a, b, _, bleu, _ in reference_pairs:
        got = symmetric_bleu(normalize(a), normalize(b))
        assert round(got, 1) == bleu
        assert got == pytest.approx(oracle_symmetric(normalize(a).tokens, normalize(b).tokens), abs=1e-9)


def test_table1_jaccard(reference_pairs):
    for a, b, _, _, jac in reference_pairs:
        assert jaccard(normalize(a), normalize(b)) == pytest.approx(jac, abs=5e-4)


def test_jaccard_hand_values():
    a = normalize("Therefore, unavoidable waiting times may occur.")
    b = normalize("For this reason, there may be inevitable waiting times.")
    assert jaccard(a, b) == 3 / 12


def test_jaccard_degenerate_cases():
    both = jaccard([], [])
    assert both == 1.0 and both.degenerate
    assert jaccard([], ["a"]) == 0.0
    assert not jaccard(["a"], ["a"]).degenerate


def test_config_validation():
    with pytest.raises(ValueError):
        BleuConfig(max_ngram_order=0)
    with pytest.raises(ValueError):
        BleuConfig(smoothing="magic")
    with pytest.raises(ValueError):
        BleuConfig(smoothing="floor", floor_epsilon=0)
    with pytest.raises(ValueError):
        BleuConfig(smoothing="add_k", add_k=-1)


def test_max_order_respected():
    cfg = BleuConfig(max_ngram_order=2)
    b = sentence_bleu("a b c".split(), "a b d".split(), cfg)
    assert len(b.precisions) == 2
    assert b.score == pytest.approx(oracle_bleu("a b c".split(), "a b d".split(), order=2), abs=1e-12)


@given(tokens_st, tokens_st)
def test_symmetric_is_symmetric_and_between_directions(a, b):
    s = symmetric_bleu(a, b)
    assert s == symmetric_bleu(b, a)
    d1, d2 = sentence_bleu(a, b).score, sentence_bleu(b, a).score
    assert min(d1, d2) - 1e-12 <= s <= max(d1, d2) + 1e-12
    assert 0.0 <= s <= 100.0


@given(tokens_st, tokens_st, st.data())
def test_oov_substitution_never_raises_precision(h, r, data):
    i = data.draw(st.integers(0, len(h) - 1))
    worse = h[:i] + ["<oov>"] + h[i + 1 :]
    before = sentence_bleu(h, r).precisions
    after = sentence_bleu(worse, r).precisions
    assert all(x <= y + 1e-15 for x, y in zip(after, before))


@settings(max_examples=200)
@given(tokens_st, tokens_st, tokens_st)
def test_jaccard_distance_triangle(a, b, c):
    d = lambda x, y: 1 - jaccard(x, y)
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-12


@given(tokens_st, tokens_st, st.data())
def test_jaccard_duplicate_invariance(a, b, data):
    i = data.draw(st.integers(0, len(a) - 1))
    assert jaccard(a + [a[i]], b) == jaccard(a, b)
    assert jaccard(a, b) == jaccard(b, a)
