import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmretrieval.core import KnowledgeDoc, MultimodalQuery
from mmretrieval.encoder import encode_knowledge, encode_query, zero_params
from mmretrieval.trainer import (
    Batch,
    Example,
    TrainConfig,
    TrainingDiverged,
    attach_negatives,
    contrastive_loss,
    finite_difference_check,
    loss_gradient,
    make_batches,
    mine_hard_negatives,
    sgd_step,
    train,
    train_epoch,
)

from conftest import random_batch_parts, small_params
from oracles import contrastive_loss_straight, mips_brute


def engineered_params():
    """Identity heads, zero bias: "w1" encodes to 0.5 in every dim, "w2" (knowledge) to 0."""
    p = zero_params(small_params())
    text_emb, know_emb = p.text_emb.copy(), p.know_emb.copy()
    text_emb[p.text_vocab["w1"]] = math.atanh(0.5)
    know_emb[p.know_vocab["w1"]] = math.atanh(0.5)
    return p.with_tensors(text_emb=text_emb, know_emb=know_emb, query_proj=np.eye(8), know_proj=np.eye(8))


def test_single_pair_loss_is_zero(params8):
    batch = Batch([MultimodalQuery("q", "w1")], [KnowledgeDoc("d", "w2")])
    assert contrastive_loss(batch, params8) == 0.0
    assert all(np.all(g == 0) for g in loss_gradient(batch, params8).values())


def test_zero_params_two_pairs_is_ln2(params8):
    z = zero_params(params8)
    batch = Batch([MultimodalQuery("a", "w1"), MultimodalQuery("b", "w2")], [KnowledgeDoc("x", "w3"), KnowledgeDoc("y", "w4")])
    assert contrastive_loss(batch, z) == pytest.approx(math.log(2), abs=1e-12)


def test_engineered_hard_negative_loss():
    p = engineered_params()
    q, pos, neg = MultimodalQuery("q", "w1"), KnowledgeDoc("p", "w1"), KnowledgeDoc("n", "w2")
    assert encode_query(q, p) == pytest.approx(np.full(8, 0.5), abs=1e-15)
    assert encode_knowledge(neg, p) == pytest.approx(np.zeros(8), abs=0)
    loss = contrastive_loss(Batch([q], [pos], [[neg]]), p)
    assert loss == pytest.approx(math.log(1 + math.exp(-2)), abs=1e-9)
    assert loss == pytest.approx(0.126928, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(0, 2))
def test_loss_matches_straight_line(seed, n_queries, n_neg):
    qs, ds = random_batch_parts(seed, n_queries=n_queries, n_docs=n_queries + 3 * n_neg)
    negs = [ds[n_queries + i * n_neg: n_queries + (i + 1) * n_neg] for i in range(n_queries)] if n_neg else None
    batch = Batch(qs, ds[:n_queries], negs)
    p = small_params(seed=seed, scale=1.0)
    assert abs(contrastive_loss(batch, p) - contrastive_loss_straight(qs, ds[:n_queries], negs, p)) <= 1e-10
    assert contrastive_loss(batch, p) >= 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_adding_hard_negative_never_lowers_loss(seed, n_queries):
    qs, ds = random_batch_parts(seed, n_queries=n_queries, n_docs=n_queries + 1)
    p = small_params(seed=seed, scale=1.0)
    plain = contrastive_loss(Batch(qs, ds[:n_queries]), p)
    extra = [[ds[-1]]] + [[] for _ in range(n_queries - 1)]
    assert contrastive_loss(Batch(qs, ds[:n_queries], extra), p) >= plain - 1e-12


def test_unused_rows_have_zero_gradient(params8):
    batch = Batch([MultimodalQuery("a", "w1", (2,)), MultimodalQuery("b", "w2")], [KnowledgeDoc("x", "w3"), KnowledgeDoc("y", "w4")])
    g = loss_gradient(batch, params8)
    used_text = {params8.text_vocab["w1"], params8.text_vocab["w2"]}
    for r in range(g["text_emb"].shape[0]):
        assert np.any(g["text_emb"][r] != 0) == (r in used_text)
    assert np.all(g["visual_emb"][[0, 1, 3, 4]] == 0) and np.any(g["visual_emb"][2] != 0)
    used_know = {params8.know_vocab["w3"], params8.know_vocab["w4"]}
    assert all(np.all(g["know_emb"][r] == 0) for r in range(g["know_emb"].shape[0]) if r not in used_know)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradient_matches_finite_differences(seed):
    qs, ds = random_batch_parts(seed, n_queries=4, n_docs=8)
    batch = Batch(qs, ds[:4], [[d] for d in ds[4:]])
    checks = finite_difference_check(batch, small_params(seed=seed, scale=1.0), n_coords=200, seed=seed)
    assert len(checks) == 200
    assert max(c.rel_error for c in checks) <= 1e-4


def toy_data():
    docs = [KnowledgeDoc(f"d{i}", f"w{i} w{i + 6}") for i in range(6)]
    return [Example(MultimodalQuery(f"q{i}", f"w{i}", (i % 5,)), d) for i, d in enumerate(docs)]


def test_zero_learning_rate_leaves_params(params8):
    out, _ = train_epoch(toy_data(), TrainConfig(lr=0, batch_size=3), params8)
    for name, t in params8.tensors().items():
        assert np.array_equal(out.tensors()[name], t)


def test_single_pair_stays_at_zero_loss(params8):
    ex = toy_data()[:1]
    out, losses = train(ex, TrainConfig(epochs=3, batch_size=4), params8)
    assert losses == [0.0, 0.0, 0.0]


def test_one_step_lowers_batch_loss():
    p = small_params(scale=1.0)
    qs, ds = random_batch_parts(5, n_queries=4, n_docs=4)
    batch = Batch(qs, ds)
    before = contrastive_loss(batch, p)
    after = contrastive_loss(batch, sgd_step(p, loss_gradient(batch, p), 1e-3))
    assert after < before


def test_training_reduces_loss_and_is_deterministic():
    cfg = TrainConfig(lr=0.5, epochs=30, batch_size=4, seed=3)
    p0 = small_params(scale=0.5)
    a, la = train(toy_data(), cfg, p0)
    b, lb = train(toy_data(), cfg, p0)
    assert la == lb and la[-1] < la[0]
    assert all(np.array_equal(a.tensors()[n], b.tensors()[n]) for n in a.tensors())


def test_batches_keep_remainder_and_cover_data():
    data = toy_data()
    batches = make_batches(data, TrainConfig(batch_size=4, seed=1), epoch=2)
    assert [len(b) for b in batches] == [4, 2]
    assert sorted(q.id for b in batches for q in b.queries) == sorted(ex.query.id for ex in data)
    assert [q.id for b in make_batches(data, TrainConfig(batch_size=4, seed=1), epoch=2) for q in b.queries] == \
        [q.id for b in batches for q in b.queries]


def test_divergence_is_reported():
    data = toy_data()
    with pytest.raises(TrainingDiverged):
        train_epoch(data, TrainConfig(lr=float("inf"), batch_size=6), small_params(scale=1.0))


def test_mining_with_gold_only_corpus_is_empty(params8):
    q = MultimodalQuery("q", "w1", gold_ids=("g",))
    assert mine_hard_negatives(params8, [KnowledgeDoc("g", "w1")], [q], depth=2) == {"q": []}


def test_mining_small_corpus_returns_all_non_gold(params8):
    corpus = [KnowledgeDoc("g", "w1"), KnowledgeDoc("a", "w2"), KnowledgeDoc("b", "w3")]
    q = MultimodalQuery("q", "w1", gold_ids=("g",))
    assert sorted(mine_hard_negatives(params8, corpus, [q], depth=2)["q"]) == ["a", "b"]


def test_mining_matches_brute_force():
    p = small_params(seed=9, scale=1.0)
    rng = np.random.default_rng(9)
    corpus = [KnowledgeDoc(f"d{i:02d}", " ".join(rng.choice([f"w{j}" for j in range(12)], 3))) for i in range(50)]
    queries = [MultimodalQuery(f"q{i}", f"w{i}", (i % 5,), (f"d{i:02d}", f"d{i + 10:02d}")) for i in range(5)]
    mined = mine_hard_negatives(p, corpus, queries, depth=7)
    assert list(mined) == sorted(q.id for q in queries)
    rows = [encode_knowledge(d, p) for d in corpus]
    ids = [d.id for d in corpus]
    for q in queries:
        ranked = [i for i, _ in mips_brute(rows, ids, encode_query(q, p), len(ids)) if i not in q.gold_ids]
        assert mined[q.id] == ranked[:7]
        assert not set(mined[q.id]) & set(q.gold_ids)


def test_attach_negatives():
    data = toy_data()
    corpus = [ex.positive for ex in data]
    out = attach_negatives(data, {"q0": ["d3", "d4"]}, corpus)
    assert [d.id for d in out[0].negatives] == ["d3", "d4"] and out[1].negatives == ()


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr=-1)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
