"""Okapi BM25 over an inverted index.

Binary index layout (all integers u32 little-endian, reals f64 little-endian)::

    b"BM25" | version | k1 | b | N
    N x ( doc_len | id byte length | id utf-8 bytes )
    term count
    per term, sorted by term:
        term byte length | term utf-8 bytes | posting count
        posting count x ( doc ordinal | term frequency )
"""

from __future__ import annotations

import math
import struct
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import KnowledgeDoc, ScoredHit, select_top
from .textproc import terms

MAGIC = b"BM25"
VERSION = 1


@dataclass(frozen=True)
class Bm25Index:
    # term -> (ordinals, term frequencies), both int arrays sorted by ordinal
    postings: Mapping[str, tuple[np.ndarray, np.ndarray]]
    doc_len: np.ndarray
    avgdl: float
    k1: float
    b: float
    id_map: tuple[str, ...]

    @property
    def N(self) -> int:
        return len(self.id_map)

    def df(self, term: str) -> int:
        entry = self.postings.get(term)
        return 0 if entry is None else len(entry[0])

    def idf(self, term: str) -> float:
        df = self.df(term)
        return math.log(1.0 + (self.N - df + 0.5) / (df + 0.5))

    def scores(self, query_text: str) -> np.ndarray:
        """BM25 score of every document, as a length-N array."""
        out = np.zeros(self.N)
        norm = self.k1 * (1.0 - self.b + self.b * self.doc_len / self.avgdl)
        for term in dict.fromkeys(terms(query_text)):
            entry = self.postings.get(term)
            if entry is None:
                continue
            ords, tf = entry
            out[ords] += self.idf(term) * tf * (self.k1 + 1.0) / (tf + norm[ords])
        return out


def build_bm25_index(corpus: Sequence[KnowledgeDoc], k1: float = 1.2, b: float = 0.75) -> Bm25Index:
    if not corpus:
        raise ValueError("cannot index an empty corpus")
    if k1 <= 0 or not 0 <= b <= 1:
        raise ValueError(f"need k1 > 0 and 0 <= b <= 1, got k1={k1}, b={b}")
    lists: dict[str, tuple[list[int], list[int]]] = {}
    lengths = []
    for ordinal, doc in enumerate(corpus):
        toks = terms(doc.text)
        lengths.append(len(toks))
        for term, tf in Counter(toks).items():
            ords, tfs = lists.setdefault(term, ([], []))
            ords.append(ordinal)
            tfs.append(tf)
    postings = {
        t: (np.asarray(o, dtype=np.int64), np.asarray(f, dtype=np.float64))
        for t, (o, f) in lists.items()
    }
    doc_len = np.asarray(lengths, dtype=np.float64)
    avgdl = float(doc_len.mean())
    if avgdl == 0:
        raise ValueError("corpus has no indexable (non-stopword) tokens")
    return Bm25Index(postings, doc_len, avgdl, float(k1), float(b), tuple(d.id for d in corpus))


def bm25_search(index: Bm25Index, query_text: str, k: int) -> list[ScoredHit]:
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = index.scores(query_text)
    return select_top(scores, index.id_map, k, candidates=np.flatnonzero(scores > 0))


def save_bm25_index(index: Bm25Index, path) -> None:
    parts = [MAGIC, struct.pack("<IddI", VERSION, index.k1, index.b, index.N)]
    for doc_id, length in zip(index.id_map, index.doc_len):
        raw = doc_id.encode("utf-8")
        parts.append(struct.pack("<II", int(length), len(raw)) + raw)
    parts.append(struct.pack("<I", len(index.postings)))
    for term in sorted(index.postings):
        ords, tf = index.postings[term]
        raw = term.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw + struct.pack("<I", len(ords)))
        pairs = np.empty((len(ords), 2), dtype="<u4")
        pairs[:, 0] = ords
        pairs[:, 1] = tf
        parts.append(pairs.tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


def load_bm25_index(path) -> Bm25Index:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a BM25 index file")
    version, k1, b, n = struct.unpack_from("<IddI", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported index version {version}")
    pos = 4 + struct.calcsize("<IddI")
    ids, lengths = [], []
    for _ in range(n):
        length, nbytes = struct.unpack_from("<II", data, pos)
        pos += 8
        ids.append(data[pos:pos + nbytes].decode("utf-8"))
        lengths.append(length)
        pos += nbytes
    (n_terms,) = struct.unpack_from("<I", data, pos)
    pos += 4
    postings = {}
    for _ in range(n_terms):
        (nbytes,) = struct.unpack_from("<I", data, pos)
        pos += 4
        term = data[pos:pos + nbytes].decode("utf-8")
        pos += nbytes
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        pairs = np.frombuffer(data, dtype="<u4", count=2 * count, offset=pos).reshape(count, 2)
        pos += 8 * count
        postings[term] = (pairs[:, 0].astype(np.int64), pairs[:, 1].astype(np.float64))
    doc_len = np.asarray(lengths, dtype=np.float64)
    return Bm25Index(postings, doc_len, float(doc_len.mean()), k1, b, tuple(ids))
