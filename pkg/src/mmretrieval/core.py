"""Domain records and the JSONL / run-file formats shared by every module.

File formats
------------
corpus.jsonl   ``{"id": str, "text": str}``
queries.jsonl  ``{"id": str, "text": str, "visual_tokens": [int], "gold_ids": [str], "answers": [str]}``
run.txt        ``qid docid rank score`` per line, rank 1-based, score with 6 decimals
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

SCORE_DECIMALS = 6


class FormatError(ValueError):
    """A malformed input record, located by file and line."""

    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True)
class KnowledgeDoc:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be non-empty")
        if not self.text.strip():
            raise ValueError(f"document {self.id!r} has empty text")


@dataclass(frozen=True)
class MultimodalQuery:
    id: str
    text: str = ""
    visual_tokens: tuple[int, ...] = ()
    gold_ids: tuple[str, ...] = ()
    answers: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "visual_tokens", tuple(int(v) for v in self.visual_tokens))
        object.__setattr__(self, "gold_ids", tuple(self.gold_ids))
        if self.answers is not None:
            object.__setattr__(self, "answers", tuple(self.answers))
        if any(v < 0 for v in self.visual_tokens):
            raise ValueError(f"query {self.id!r} has a negative visual token")
        if not self.text.strip() and not self.visual_tokens:
            raise ValueError(f"query {self.id!r} has neither text nor visual tokens")

    def text_only(self) -> "MultimodalQuery":
        return MultimodalQuery(self.id, self.text, (), self.gold_ids, self.answers)

    def image_only(self) -> "MultimodalQuery":
        return MultimodalQuery(self.id, "", self.visual_tokens, self.gold_ids, self.answers)

    def to_json(self) -> dict:
        rec = {
            "id": self.id,
            "text": self.text,
            "visual_tokens": list(self.visual_tokens),
            "gold_ids": list(self.gold_ids),
        }
        if self.answers is not None:
            rec["answers"] = list(self.answers)
        return rec


class ScoredHit(NamedTuple):
    doc_id: str
    score: float


# A ranked list is a plain list of hits, best first; a run maps query id to one.
RankedList = list
RunFile = dict


def rank_key(hit: ScoredHit):
    """Sort key: descending score, ties by ascending doc id."""
    return (-hit.score, hit.doc_id)


@dataclass(frozen=True)
class CorpusManifest:
    doc_count: int
    path: str
    checksum: str


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield (line number, record) for every non-blank line."""
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(path, lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise FormatError(path, lineno, "record is not a JSON object")
            yield lineno, rec


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_corpus(path) -> tuple[list[KnowledgeDoc], CorpusManifest]:
    docs = []
    seen = {}
    for lineno, rec in iter_jsonl(path):
        doc_id, text = rec.get("id"), rec.get("text")
        if not isinstance(doc_id, str) or not isinstance(text, str):
            raise FormatError(path, lineno, "expected string fields 'id' and 'text'")
        if doc_id in seen:
            raise FormatError(path, lineno, f"duplicate document id {doc_id!r} (first on line {seen[doc_id]})")
        try:
            docs.append(KnowledgeDoc(doc_id, text))
        except ValueError as exc:
            raise FormatError(path, lineno, str(exc)) from None
        seen[doc_id] = lineno
    return docs, CorpusManifest(len(docs), os.fspath(path), _sha256(path))


def write_corpus(path, docs: Iterable[KnowledgeDoc]) -> None:
    write_jsonl(path, ({"id": d.id, "text": d.text} for d in docs))


def query_from_json(rec: dict) -> MultimodalQuery:
    tokens = rec.get("visual_tokens") or []
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in tokens):
        raise ValueError(f"query {rec.get('id')!r}: visual_tokens must be integers")
    return MultimodalQuery(
        id=str(rec["id"]),
        text=rec.get("text") or "",
        visual_tokens=tuple(tokens),
        gold_ids=tuple(rec.get("gold_ids") or ()),
        answers=tuple(rec["answers"]) if rec.get("answers") is not None else None,
    )


def load_queries(path) -> list[MultimodalQuery]:
    out = []
    for lineno, rec in iter_jsonl(path):
        if "id" not in rec:
            raise FormatError(path, lineno, "query record without 'id'")
        try:
            out.append(query_from_json(rec))
        except ValueError as exc:
            raise FormatError(path, lineno, str(exc)) from None
    return out


def write_queries(path, queries: Iterable[MultimodalQuery]) -> None:
    write_jsonl(path, (q.to_json() for q in queries))


def check_ranked(qid: str, hits) -> None:
    seen = set()
    for i, hit in enumerate(hits):
        if hit.doc_id in seen:
            raise ValueError(f"query {qid!r}: duplicate doc id {hit.doc_id!r}")
        seen.add(hit.doc_id)
        if not math.isfinite(hit.score):
            raise ValueError(f"query {qid!r}: non-finite score for {hit.doc_id!r}")
        if i and rank_key(hits[i - 1]) > rank_key(hit):
            raise ValueError(f"query {qid!r}: hits not in rank order at position {i + 1}")


def write_run(run: dict, path) -> None:
    """Write ``run`` as whitespace-separated ``qid docid rank score`` lines."""
    lines = []
    for qid, hits in run.items():
        check_ranked(qid, hits)
        for rank, hit in enumerate(hits, 1):
            if any(c.isspace() for c in qid + hit.doc_id):
                raise ValueError(f"ids may not contain whitespace: {qid!r} / {hit.doc_id!r}")
            lines.append(f"{qid} {hit.doc_id} {rank} {hit.score:.{SCORE_DECIMALS}f}\n")
    with open(path, "w", encoding="utf-8") as f:
        f.writelines(lines)


def load_run(path) -> dict:
    run: dict[str, list[ScoredHit]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FormatError(path, lineno, "expected 'qid docid rank score'")
            qid, doc_id, rank, score = parts
            hits = run.setdefault(qid, [])
            try:
                rank_i, score_f = int(rank), float(score)
            except ValueError:
                raise FormatError(path, lineno, "rank/score not numeric") from None
            if rank_i != len(hits) + 1:
                raise FormatError(path, lineno, f"rank {rank_i} out of sequence for {qid!r}")
            hits.append(ScoredHit(doc_id, score_f))
    return run


def top_ordinals(scores, doc_ids, k: int, candidates=None) -> list[int]:
    """Ordinals of the exact top-``k`` of ``scores`` (a 1-D array by ordinal).

    ``candidates`` restricts the pool to the given ordinals. Ties are broken by
    ascending doc id, so the result never depends on ordinal order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = np.asarray(scores)
    pool = np.arange(len(scores)) if candidates is None else np.asarray(candidates, dtype=np.int64)
    if pool.size == 0:
        return []
    vals = scores[pool]
    if k < pool.size:
        # everything tied with the k-th best must survive until the id tie-break
        kth = np.partition(vals, pool.size - k)[pool.size - k]
        pool = pool[vals >= kth]
    ranked = sorted(pool.tolist(), key=lambda i: (-scores[i], doc_ids[i]))
    return ranked[:k]


def select_top(scores, doc_ids, k: int, candidates=None) -> list[ScoredHit]:
    """Exact top-``k`` as scored hits; see :func:`top_ordinals`."""
    return [ScoredHit(doc_ids[i], float(scores[i])) for i in top_ordinals(scores, doc_ids, k, candidates)]
