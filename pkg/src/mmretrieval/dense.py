"""Exact inner-product search over document embeddings, plus late fusion.

Embedding file: b"EMB1" | u32 rows | u32 dim | rows*dim f32 little-endian,
row-major. Doc ids live next to it in ``<path>.ids``, one per line.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import KnowledgeDoc, ScoredHit, select_top, top_ordinals
from .encoder import DualEncoderParams, encode_docs

MAGIC = b"EMB1"


@dataclass(frozen=True)
class EmbeddingMatrix:
    rows: np.ndarray
    id_map: tuple[str, ...]

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[1] < 1:
            raise ValueError("embedding rows must be an N x dim matrix with dim >= 1")
        if self.rows.shape[0] != len(self.id_map):
            raise ValueError(f"{self.rows.shape[0]} rows but {len(self.id_map)} ids")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("embedding rows must be finite")

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self):
        return len(self.id_map)

    def scores(self, query_vec) -> np.ndarray:
        q = np.asarray(query_vec, dtype=np.float64)
        if q.shape != (self.dim,):
            raise ValueError(f"query vector has shape {q.shape}, index dim is {self.dim}")
        return self.rows @ q


def build_embedding_index(
    corpus: Sequence[KnowledgeDoc], params: DualEncoderParams, chunk: int = 4096
) -> EmbeddingMatrix:
    if not corpus:
        raise ValueError("cannot index an empty corpus")
    rows = np.vstack([encode_docs(corpus[i:i + chunk], params) for i in range(0, len(corpus), chunk)])
    bad = np.flatnonzero(~np.all(np.isfinite(rows), axis=1))
    if bad.size:
        raise ValueError(f"non-finite embedding for document {corpus[bad[0]].id!r}")
    return EmbeddingMatrix(rows, tuple(d.id for d in corpus))


def mips_topk(index: EmbeddingMatrix, query_vec, k: int) -> list[ScoredHit]:
    """The ``k`` rows with the largest inner product against ``query_vec``."""
    return select_top(index.scores(query_vec), index.id_map, k)


def late_fusion_rerank(index: EmbeddingMatrix, image_vec, text_vec, m: int = 100, k: int = 100) -> list[ScoredHit]:
    """Union the per-modality top-``m`` lists, re-rank by the sum of both scores.

    Both inner products are recomputed for every candidate, so a document
    found by only one modality still gets its true score from the other.
    """
    if not 1 <= k <= m:
        raise ValueError(f"need m >= k >= 1, got m={m}, k={k}")
    img = index.scores(image_vec)
    txt = index.scores(text_vec)
    cand = set(top_ordinals(img, index.id_map, m)) | set(top_ordinals(txt, index.id_map, m))
    return select_top(img + txt, index.id_map, k, candidates=sorted(cand))


def save_embeddings(index: EmbeddingMatrix, path) -> None:
    n, dim = index.rows.shape
    with open(path, "wb") as f:
        f.write(MAGIC + struct.pack("<II", n, dim))
        f.write(np.ascontiguousarray(index.rows, dtype="<f4").tobytes())
    with open(ids_path(path), "w", encoding="utf-8") as f:
        f.writelines(f"{d}\n" for d in index.id_map)


def load_embeddings(path) -> EmbeddingMatrix:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not an embedding file")
    n, dim = struct.unpack_from("<II", data, 4)
    rows = np.frombuffer(data, dtype="<f4", count=n * dim, offset=12).astype(np.float64).reshape(n, dim)
    with open(ids_path(path), encoding="utf-8") as f:
        ids = tuple(line.rstrip("\n") for line in f if line.strip())
    return EmbeddingMatrix(rows, ids)


def ids_path(path) -> str:
    return os.fspath(path) + ".ids"
