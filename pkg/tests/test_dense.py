import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmretrieval.core import KnowledgeDoc
from mmretrieval.dense import (
    EmbeddingMatrix,
    build_embedding_index,
    late_fusion_rerank,
    load_embeddings,
    mips_topk,
    save_embeddings,
)
from mmretrieval.encoder import encode_knowledge, zero_params

from oracles import fusion_brute, mips_brute


def matrix(rows, ids=None):
    rows = np.asarray(rows, dtype=float)
    return EmbeddingMatrix(rows, tuple(ids or (f"doc{i + 1}" for i in range(len(rows)))))


def test_build_rows_equal_individual_encodings(params8):
    corpus = [KnowledgeDoc("a", "w1 w2"), KnowledgeDoc("b", "w3")]
    idx = build_embedding_index(corpus, params8)
    assert idx.rows.shape == (2, 8)
    for row, d in zip(idx.rows, corpus):
        np.testing.assert_allclose(row, encode_knowledge(d, params8), atol=1e-15, rtol=0)


def test_zero_params_rows_are_tanh_bias(params8):
    p = zero_params(params8).with_tensors(know_bias=np.linspace(-1, 1, 8))
    idx = build_embedding_index([KnowledgeDoc("a", "w1"), KnowledgeDoc("b", "w2 w3")], p)
    assert np.array_equal(idx.rows, np.tile(np.tanh(np.linspace(-1, 1, 8)), (2, 1)))


def test_build_is_deterministic(params8):
    corpus = [KnowledgeDoc(f"d{i}", f"w{i % 12} w{(3 * i) % 12} w{(5 * i) % 12}") for i in range(50)]
    a = build_embedding_index(corpus, params8)
    b = build_embedding_index(corpus, params8)
    assert a.rows.tobytes() == b.rows.tobytes()


def test_build_rejects_empty(params8):
    with pytest.raises(ValueError):
        build_embedding_index([], params8)


def test_orthogonal_top1():
    assert mips_topk(matrix([[1, 0], [0, 1]]), [1, 0], 1) == [("doc1", 1.0)]


def test_symmetric_tie_by_id():
    hits = mips_topk(matrix([[1, 0], [0, 1]], ["zb", "za"]), [1, 1], 2)
    assert [h.doc_id for h in hits] == ["za", "zb"] and hits[0].score == hits[1].score == 1.0


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dim"):
        mips_topk(matrix([[1, 0]]), [1, 0, 0], 1)


def test_random_matches_full_sort():
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(50, 8))
    idx = matrix(rows)
    q = rng.normal(size=8)
    hits = mips_topk(idx, q, 10)
    expected = mips_brute(rows, idx.id_map, q, 10)
    assert [h.doc_id for h in hits] == [i for i, _ in expected]
    assert max(abs(h.score - s) for h, (_, s) in zip(hits, expected)) <= 1e-9


def test_fewer_docs_than_k():
    assert len(mips_topk(matrix([[1, 0], [0, 1]]), [1, 2], 10)) == 2


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(0, 10_000), st.floats(0.01, 100))
def test_full_order_prefix_and_scale_invariance(n, seed, lam):
    rng = np.random.default_rng(seed)
    # coarse values force plenty of exact ties
    rows = rng.integers(-2, 3, size=(n, 3)).astype(float)
    idx = matrix(rows)
    q = rng.integers(-2, 3, size=3).astype(float)
    full = mips_topk(idx, q, n)
    assert len(full) == n
    for k in range(1, n):
        assert mips_topk(idx, q, k) == full[:k]
    lam = float(2 ** round(np.log2(lam)))  # power of two: scaling is exact
    scaled = mips_topk(idx, lam * q, n)
    assert [h.doc_id for h in scaled] == [h.doc_id for h in full]
    assert [h.score for h in scaled] == [lam * h.score for h in full]


def test_fusion_shared_winner():
    idx = matrix([[5, 5], [1, 0], [0, 1]])
    assert late_fusion_rerank(idx, [1, 0], [0, 1], m=2, k=1)[0].doc_id == "doc1"


def test_fusion_zero_text_vector_equals_image_ranking():
    rng = np.random.default_rng(1)
    idx = matrix(rng.normal(size=(30, 4)))
    img = rng.normal(size=4)
    fused = late_fusion_rerank(idx, img, np.zeros(4), m=8, k=8)
    assert fused == mips_topk(idx, img, 8)


def test_fusion_identical_vectors_double_scores():
    rng = np.random.default_rng(2)
    idx = matrix(rng.normal(size=(30, 4)))
    v = rng.normal(size=4)
    fused = late_fusion_rerank(idx, v, v, m=10, k=10)
    single = mips_topk(idx, v, 10)
    assert [h.doc_id for h in fused] == [h.doc_id for h in single]
    np.testing.assert_allclose([h.score for h in fused], [2 * h.score for h in single], atol=1e-12)


def test_fusion_matches_brute_force():
    rng = np.random.default_rng(3)
    rows = rng.normal(size=(50, 6))
    idx = matrix(rows)
    img, txt = rng.normal(size=6), rng.normal(size=6)
    got = late_fusion_rerank(idx, img, txt, m=10, k=5)
    expected = fusion_brute(rows, idx.id_map, img, txt, 10, 5)
    assert [h.doc_id for h in got] == [i for i, _ in expected]
    assert max(abs(h.score - s) for h, (_, s) in zip(got, expected)) <= 1e-9


def test_fusion_argument_checks():
    idx = matrix([[1, 0]])
    with pytest.raises(ValueError):
        late_fusion_rerank(idx, [1, 0], [0, 1], m=1, k=2)
    with pytest.raises(ValueError):
        late_fusion_rerank(idx, [1, 0, 0], [0, 1], m=1, k=1)


def test_embedding_file_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    idx = matrix(rng.normal(size=(7, 3)), [f"id-{i}" for i in range(7)])
    path = tmp_path / "e.emb"
    save_embeddings(idx, path)
    raw = path.read_bytes()
    assert raw[:4] == b"EMB1" and len(raw) == 12 + 7 * 3 * 4
    back = load_embeddings(path)
    assert back.id_map == idx.id_map
    np.testing.assert_allclose(back.rows, idx.rows.astype(np.float32), rtol=0, atol=0)


def test_matrix_validation():
    with pytest.raises(ValueError):
        EmbeddingMatrix(np.zeros((2, 2)), ("a",))
    with pytest.raises(ValueError):
        EmbeddingMatrix(np.array([[np.inf, 0.0]]), ("a",))
