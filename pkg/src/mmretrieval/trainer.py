"""Contrastive training with in-batch (and optional mined) negatives.

For query i the candidate set is every positive in the batch plus the hard
negatives attached to query i; the loss is the batch mean of
``logsumexp(scores_i) - score_i(positive_i)``. Gradients are analytic and
are checked against central differences in the test suite.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import KnowledgeDoc, MultimodalQuery, top_ordinals
from .dense import EmbeddingMatrix, build_embedding_index
from .encoder import (
    DocTokens,
    DualEncoderParams,
    QueryTokens,
    TENSOR_NAMES,
    encode_queries,
    head,
    pool_docs,
    pool_queries,
)

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.1
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0
    negatives_per_query: int = 1

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("learning rate must be non-negative")
        if self.epochs < 1 or self.batch_size < 1 or self.negatives_per_query < 0:
            raise ValueError(f"invalid training config {self}")


@dataclass(frozen=True)
class Example:
    """One training item: a query, its positive passage, optional mined negatives."""

    query: MultimodalQuery
    positive: KnowledgeDoc
    negatives: tuple[KnowledgeDoc, ...] = ()


@dataclass
class Batch:
    queries: Sequence[MultimodalQuery]
    positives: Sequence[KnowledgeDoc]
    hard_negatives: Sequence[Sequence[KnowledgeDoc]] | None = None

    def __post_init__(self):
        if not self.queries:
            raise ValueError("empty batch")
        if len(self.queries) != len(self.positives):
            raise ValueError("queries and positives differ in length")
        if self.hard_negatives is not None and len(self.hard_negatives) != len(self.queries):
            raise ValueError("hard_negatives must parallel queries")

    def __len__(self):
        return len(self.queries)


@dataclass
class _Forward:
    qtok: QueryTokens
    dtok: DocTokens
    hq: np.ndarray
    zq: np.ndarray
    hd: np.ndarray
    zd: np.ndarray
    probs: np.ndarray   # masked softmax over candidates, B x C
    losses: np.ndarray  # per query


def _forward(batch: Batch, params: DualEncoderParams) -> _Forward:
    B = len(batch)
    negs = batch.hard_negatives or [()] * B
    docs = list(batch.positives) + [n for group in negs for n in group]
    neg_owner = np.array([i for i, group in enumerate(negs) for _ in group], dtype=np.int64)

    qtok = QueryTokens.of(batch.queries, params)
    dtok = DocTokens.of(docs, params)
    hq = pool_queries(qtok, params)
    zq = head(hq, params.query_proj, params.query_bias)
    hd = pool_docs(dtok, params)
    zd = head(hd, params.know_proj, params.know_bias)
    if not (np.all(np.isfinite(zq)) and np.all(np.isfinite(zd))):
        raise ValueError("non-finite encoding in batch")

    scores = zq @ zd.T
    allowed = np.zeros(scores.shape, dtype=bool)
    allowed[:, :B] = True
    allowed[neg_owner, B + np.arange(len(neg_owner))] = True
    logits = np.where(allowed, scores, -np.inf)
    top = logits.max(axis=1, keepdims=True)
    expd = np.exp(logits - top)
    total = expd.sum(axis=1, keepdims=True)
    lse = top[:, 0] + np.log(total[:, 0])
    losses = lse - scores[np.arange(B), np.arange(B)]
    return _Forward(qtok, dtok, hq, zq, hd, zd, expd / total, losses)


def contrastive_loss(batch: Batch, params: DualEncoderParams) -> float:
    return float(_forward(batch, params).losses.mean())


def _scatter_rows(grad: np.ndarray, bag, d_pooled: np.ndarray) -> None:
    np.add.at(grad, bag.ids, d_pooled[bag.owner] / bag.counts[bag.owner, None])


def _backward(fw: _Forward, params: DualEncoderParams) -> dict[str, np.ndarray]:
    B = len(fw.losses)
    g_scores = fw.probs.copy()
    g_scores[np.arange(B), np.arange(B)] -= 1.0
    g_scores /= B

    d_zq = g_scores @ fw.zd
    d_zd = g_scores.T @ fw.zq
    d_aq = d_zq * (1.0 - fw.zq ** 2)
    d_ad = d_zd * (1.0 - fw.zd ** 2)

    grads = {name: np.zeros_like(t) for name, t in params.tensors().items()}
    grads["query_proj"] = d_aq.T @ fw.hq
    grads["query_bias"] = d_aq.sum(axis=0)
    grads["know_proj"] = d_ad.T @ fw.hd
    grads["know_bias"] = d_ad.sum(axis=0)
    d_hq = d_aq @ params.query_proj
    d_hd = d_ad @ params.know_proj
    _scatter_rows(grads["text_emb"], fw.qtok.text, d_hq)
    _scatter_rows(grads["visual_emb"], fw.qtok.visual, d_hq)
    _scatter_rows(grads["know_emb"], fw.dtok.bag, d_hd)
    return grads


def loss_and_gradient(batch: Batch, params: DualEncoderParams) -> tuple[float, dict[str, np.ndarray]]:
    fw = _forward(batch, params)
    return float(fw.losses.mean()), _backward(fw, params)


def loss_gradient(batch: Batch, params: DualEncoderParams) -> dict[str, np.ndarray]:
    """Gradient of :func:`contrastive_loss`, one array per parameter tensor."""
    return loss_and_gradient(batch, params)[1]


def sgd_step(params: DualEncoderParams, grads: dict[str, np.ndarray], lr: float) -> DualEncoderParams:
    if lr == 0:
        return params
    return params.with_tensors(**{n: params.tensors()[n] - lr * grads[n] for n in TENSOR_NAMES})


def _pick_negatives(ex: Example, n: int, rng: np.random.Generator) -> tuple[KnowledgeDoc, ...]:
    if n == 0 or not ex.negatives:
        return ()
    if len(ex.negatives) <= n:
        return ex.negatives
    chosen = np.sort(rng.choice(len(ex.negatives), size=n, replace=False))
    return tuple(ex.negatives[i] for i in chosen)


def make_batches(data: Sequence[Example], config: TrainConfig, epoch: int) -> list[Batch]:
    """Seeded shuffle, then consecutive batches; the remainder forms a short last batch."""
    rng = np.random.default_rng([config.seed, epoch])
    order = rng.permutation(len(data))
    use_negs = any(ex.negatives for ex in data) and config.negatives_per_query > 0
    batches = []
    for start in range(0, len(order), config.batch_size):
        items = [data[i] for i in order[start:start + config.batch_size]]
        negs = [_pick_negatives(ex, config.negatives_per_query, rng) for ex in items] if use_negs else None
        batches.append(Batch([ex.query for ex in items], [ex.positive for ex in items], negs))
    return batches


def train_epoch(
    data: Sequence[Example], config: TrainConfig, params: DualEncoderParams, epoch: int = 0
) -> tuple[DualEncoderParams, float]:
    if not data:
        raise ValueError("no training data")
    total = 0.0
    for b, batch in enumerate(make_batches(data, config, epoch)):
        loss, grads = loss_and_gradient(batch, params)
        if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            raise TrainingDiverged(epoch, b, loss)
        total += loss * len(batch)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                params = sgd_step(params, grads, config.lr)
        except ValueError:  # non-finite parameters after the step
            raise TrainingDiverged(epoch, b, loss) from None
    return params, total / len(data)


def train(
    data: Sequence[Example],
    config: TrainConfig,
    params: DualEncoderParams,
    on_epoch: Callable[[int, float], None] | None = None,
) -> tuple[DualEncoderParams, list[float]]:
    losses = []
    for epoch in range(config.epochs):
        params, loss = train_epoch(data, config, params, epoch)
        losses.append(loss)
        log.debug("epoch %d loss %.6f", epoch, loss)
        if on_epoch is not None:
            on_epoch(epoch, loss)
    return params, losses


def mine_hard_negatives(
    params: DualEncoderParams,
    corpus: Sequence[KnowledgeDoc],
    queries: Sequence[MultimodalQuery],
    depth: int = 100,
    index: EmbeddingMatrix | None = None,
) -> dict[str, list[str]]:
    """Top-``depth`` non-gold documents per query, keyed by sorted query id."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if not corpus:
        raise ValueError("cannot mine negatives from an empty corpus")
    if index is None:
        index = build_embedding_index(corpus, params)
    zq = encode_queries(queries, params)
    mined = {}
    for q, vec in zip(queries, zq):
        gold = set(q.gold_ids)
        ranked = top_ordinals(index.scores(vec), index.id_map, depth + len(gold))
        mined[q.id] = [index.id_map[i] for i in ranked if index.id_map[i] not in gold][:depth]
    return {qid: mined[qid] for qid in sorted(mined)}


def attach_negatives(
    data: Sequence[Example], mined: dict[str, list[str]], corpus: Sequence[KnowledgeDoc]
) -> list[Example]:
    by_id = {d.id: d for d in corpus}
    return [
        Example(ex.query, ex.positive, tuple(by_id[i] for i in mined.get(ex.query.id, ())))
        for ex in data
    ]


@dataclass
class GradCheck:
    tensor: str
    index: tuple[int, ...]
    analytic: float
    numeric: float

    @property
    def rel_error(self) -> float:
        scale = max(abs(self.analytic), abs(self.numeric))
        return 0.0 if scale == 0 else abs(self.analytic - self.numeric) / scale


def _reachable_rows(batch: Batch, params: DualEncoderParams) -> dict[str, np.ndarray]:
    fw = _forward(batch, params)
    return {
        "text_emb": np.unique(fw.qtok.text.ids),
        "visual_emb": np.unique(fw.qtok.visual.ids),
        "know_emb": np.unique(fw.dtok.bag.ids),
    }


def finite_difference_check(
    batch: Batch,
    params: DualEncoderParams,
    n_coords: int = 200,
    h: float = 1e-5,
    seed: int = 0,
) -> list[GradCheck]:
    """Compare analytic gradients with central differences at random coordinates.

    Embedding coordinates are drawn only from rows some token in the batch
    touches; every other row has an identically zero gradient.
    """
    rng = np.random.default_rng(seed)
    grads = loss_gradient(batch, params)
    rows = _reachable_rows(batch, params)
    coords = []
    for name, t in params.tensors().items():
        if name in rows:
            coords += [(name, (int(r), c)) for r in rows[name] for c in range(t.shape[1])]
        else:
            coords += [(name, idx) for idx in np.ndindex(t.shape)]
    picks = rng.choice(len(coords), size=min(n_coords, len(coords)), replace=False)
    out = []
    for p in picks:
        name, idx = coords[p]
        base = params.tensors()[name]
        plus, minus = base.copy(), base.copy()
        plus[idx] += h
        minus[idx] -= h
        f_plus = contrastive_loss(batch, params.with_tensors(**{name: plus}))
        f_minus = contrastive_loss(batch, params.with_tensors(**{name: minus}))
        out.append(GradCheck(name, tuple(idx), float(grads[name][idx]), (f_plus - f_minus) / (2 * h)))
    return out
