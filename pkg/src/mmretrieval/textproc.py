"""Tokenization, stopwords, tf-idf keyword scoring and sentence splitting."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, NamedTuple

MASK = "[MASK]"
MASK_SURFACE = MASK.lower()

# "[MASK]" survives as one token; otherwise runs of letters/digits.
_TOKEN_RE = re.compile(r"\[mask\]|[^\W_]+", re.IGNORECASE)
_SENTENCE_BREAK = re.compile(r"(?<=[.?!])\s+")


class Token(NamedTuple):
    surface: str
    is_stopword: bool


@lru_cache(maxsize=None)
def stopwords() -> frozenset[str]:
    text = resources.files("mmretrieval").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def is_stopword(word: str) -> bool:
    return word.lower() in stopwords()


def word_spans(text: str) -> list[tuple[int, int, str]]:
    """(start, end, lowercase surface) for every token in ``text``."""
    return [(m.start(), m.end(), m.group(0).lower()) for m in _TOKEN_RE.finditer(text)]


def tokenize(text: str, drop_stopwords: bool = False) -> list[Token]:
    sw = stopwords()
    out = []
    for _, _, surface in word_spans(text):
        stop = surface in sw
        if stop and drop_stopwords:
            continue
        out.append(Token(surface, stop))
    return out


def terms(text: str, drop_stopwords: bool = True) -> list[str]:
    """Token surfaces only; the form most callers want."""
    return [t.surface for t in tokenize(text, drop_stopwords)]


def content_terms(text: str) -> list[str]:
    """Non-stopword terms with the mask placeholder removed."""
    return [t for t in terms(text, True) if t != MASK_SURFACE]


@dataclass(frozen=True)
class TfIdfModel:
    """Document frequencies over a reference collection, scored as tf * ln(N/df)."""

    doc_count: int
    df: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.doc_count < 1:
            raise ValueError("TfIdfModel needs at least one document")
        bad = [t for t, n in self.df.items() if not 1 <= n <= self.doc_count]
        if bad:
            raise ValueError(f"document frequency out of range for {bad[:5]}")

    @classmethod
    def fit(cls, texts: Iterable[str]) -> "TfIdfModel":
        df: Counter[str] = Counter()
        n = 0
        for text in texts:
            n += 1
            df.update(set(content_terms(text)))
        return cls(n, dict(df))

    def idf(self, term: str) -> float:
        return math.log(self.doc_count / self.df.get(term, 1))


def tfidf_keywords(question: str, model: TfIdfModel, top_n: int = 3) -> list[str]:
    """Top-``top_n`` distinct content terms of ``question`` by tf-idf.

    Ties keep the order of first occurrence in the question. Terms never
    seen by ``model`` get df=1, i.e. the largest possible idf.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    words = content_terms(question)
    tf = Counter(words)
    first = {}
    for i, w in enumerate(words):
        first.setdefault(w, i)
    ranked = sorted(tf, key=lambda w: (-tf[w] * model.idf(w), first[w]))
    return ranked[:top_n]


def remove_terms(text: str, removed: Iterable[str]) -> str:
    """Delete every token of ``text`` whose lowercase surface is in ``removed``."""
    drop = {w.lower() for w in removed}
    if not drop:
        return text
    pieces = []
    pos = 0
    for start, end, surface in word_spans(text):
        if surface in drop:
            pieces.append(text[pos:start])
            pos = end
    pieces.append(text[pos:])
    return " ".join("".join(pieces).split())


def split_sentences(passage: str) -> list[str]:
    """Split after '.', '?' or '!' when followed by whitespace or end of text."""
    stripped = passage.strip()
    if not stripped:
        return []
    return [s for s in _SENTENCE_BREAK.split(stripped) if s]
