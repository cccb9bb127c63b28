"""Lowercasing, punctuation stripping and tokenization for lexical metrics.

Every lexical score in the package (BLEU, Jaccard, duplicate detection)
goes through :func:`normalize` so that the scores stay comparable.
Punctuation is never deleted in place: each punctuation character becomes
a token boundary, so ``"maintenance-free"`` yields two tokens and
``"(9.45"`` yields ``["9", "45"]``.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Literal

TokenizationMode = Literal["word", "char"]
MODES: tuple[str, ...] = ("word", "char")

# ASCII symbols that are not in a Unicode P* category but still act as separators.
EXTRA_SEPARATORS = frozenset("$%^~|<>+=")

# Languages written without word delimiters default to char mode.
CHAR_MODE_LANGUAGES = frozenset({"zh"})


@dataclass(frozen=True)
class NormalizedSentence:
    tokens: tuple[str, ...]
    original: str = field(default="", compare=False)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def joined(self) -> str:
        return " ".join(self.tokens)


def is_separator(ch: str, extra: Iterable[str] = EXTRA_SEPARATORS) -> bool:
    return unicodedata.category(ch).startswith("P") or ch in extra


def default_mode(language: str | None) -> TokenizationMode:
    """Tokenization mode for an IETF tag such as ``zh-Hans`` or ``en``."""
    if not language:
        return "word"
    primary = language.replace("_", "-").split("-")[0].lower()
    return "char" if primary in CHAR_MODE_LANGUAGES else "word"


def normalize(
    text: str,
    mode: TokenizationMode = "word",
    separators: Iterable[str] | None = None,
) -> NormalizedSentence:
    """Casefold ``text``, turn punctuation into spaces and split it.

    ``separators`` replaces the extra (non-P*) separator set when given.
    In ``char`` mode every remaining non-space character is its own token.
    """
    if mode not in MODES:
        raise ValueError(f"unknown tokenization mode {mode!r}")
    extra = EXTRA_SEPARATORS if separators is None else frozenset(separators)
    folded = text.casefold()
    cleaned = "".join(" " if is_separator(ch, extra) else ch for ch in folded)
    if mode == "word":
        tokens = tuple(cleaned.split())
    else:
        tokens = tuple(ch for ch in cleaned if not ch.isspace())
    return NormalizedSentence(tokens=tokens, original=text)
