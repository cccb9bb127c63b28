"""Paraphrase corpus mining from N-best translations, plus evaluation."""

__version__ = "0.1.0"

from .metrics import BleuConfig, jaccard, sentence_bleu, symmetric_bleu
from .selection import FilterRange, NBestRecord, ParaphrasePair, filter_pairs, mine_corpus, select_diverse_pair
from .textnorm import NormalizedSentence, normalize

__all__ = [
    "BleuConfig",
    "FilterRange",
    "NBestRecord",
    "NormalizedSentence",
    "ParaphrasePair",
    "filter_pairs",
    "jaccard",
    "mine_corpus",
    "normalize",
    "select_diverse_pair",
    "sentence_bleu",
    "symmetric_bleu",
]
