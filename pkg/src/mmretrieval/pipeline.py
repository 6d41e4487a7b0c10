"""Glue between the modules: building training sets, fresh models and runs."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Sequence

import numpy as np

from .core import KnowledgeDoc, MultimodalQuery, ScoredHit
from .dense import EmbeddingMatrix, late_fusion_rerank, mips_topk
from .encoder import DualEncoderParams, build_text_vocab, build_vocab, encode_queries, init_params
from .sparse import Bm25Index, bm25_search
from .trainer import Example

DEFAULT_INIT_SCALE = 0.5


def examples_from_queries(queries: Iterable[MultimodalQuery], corpus: Sequence[KnowledgeDoc]) -> list[Example]:
    by_id = {d.id: d for d in corpus}
    out = []
    for q in queries:
        if not q.gold_ids:
            raise ValueError(f"training query {q.id!r} has no gold id")
        if q.gold_ids[0] not in by_id:
            raise ValueError(f"gold id {q.gold_ids[0]!r} of query {q.id!r} is not in the corpus")
        out.append(Example(q, by_id[q.gold_ids[0]]))
    return out


def fresh_params(
    examples: Sequence[Example],
    dim: int = 64,
    seed: int = 0,
    extra_docs: Sequence[KnowledgeDoc] = (),
    visual_vocab_size: int | None = None,
    init_scale: float = DEFAULT_INIT_SCALE,
) -> DualEncoderParams:
    """Vocabularies from the training data, then seeded uniform initialization."""
    text_vocab = build_text_vocab(ex.query.text for ex in examples)
    know_vocab = build_vocab([ex.positive.text for ex in examples] + [d.text for d in extra_docs])
    if visual_vocab_size is None:
        visual_vocab_size = 1 + max((v for ex in examples for v in ex.query.visual_tokens), default=0)
    return init_params(text_vocab, know_vocab, visual_vocab_size, dim, seed, init_scale)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


def dense_run(
    params: DualEncoderParams, index: EmbeddingMatrix, queries: Sequence[MultimodalQuery], k: int, threads: int = 1
) -> dict[str, list[ScoredHit]]:
    vecs = encode_queries(queries, params)
    hits = _map(lambda v: mips_topk(index, v, k), list(vecs), threads)
    return {q.id: h for q, h in zip(queries, hits)}


def _modality_vec(q: MultimodalQuery, params: DualEncoderParams, image: bool) -> np.ndarray:
    try:
        part = q.image_only() if image else q.text_only()
        return encode_queries([part], params)[0]
    except ValueError:
        # the modality is absent (or has no known tokens): contributes nothing
        return np.zeros(params.dim)


def fusion_run(
    params: DualEncoderParams,
    index: EmbeddingMatrix,
    queries: Sequence[MultimodalQuery],
    k: int,
    m: int = 100,
    threads: int = 1,
) -> dict[str, list[ScoredHit]]:
    def one(q):
        img = _modality_vec(q, params, image=True)
        txt = _modality_vec(q, params, image=False)
        return late_fusion_rerank(index, img, txt, max(m, k), k)

    return {q.id: h for q, h in zip(queries, _map(one, queries, threads))}


def bm25_run(index: Bm25Index, queries: Sequence[MultimodalQuery], k: int, threads: int = 1) -> dict[str, list[ScoredHit]]:
    hits = _map(lambda q: bm25_search(index, q.text, k), queries, threads)
    return {q.id: h for q, h in zip(queries, hits)}
