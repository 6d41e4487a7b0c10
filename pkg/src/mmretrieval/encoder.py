"""Dual encoder: bag-of-tokens mean pooling followed by a linear + tanh head.

The query side pools text-token and visual-token embeddings together; the
knowledge side pools its own text-token table. Relevance is the inner
product of the two head outputs.

Params file layout (little-endian)::

    b"DEP1" | u32 dim | u32 text vocab | u32 visual vocab | u32 knowledge vocab | i64 seed
    u32 byte length + "token\\tid\\n" lines     (text vocab)
    u32 byte length + "token\\tid\\n" lines     (knowledge vocab)
    f64 tensors in TENSOR_NAMES order, row-major
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .core import KnowledgeDoc, MultimodalQuery
from .textproc import MASK_SURFACE, terms

UNK = "[unk]"
MAGIC = b"DEP1"
TENSOR_NAMES = ("text_emb", "visual_emb", "know_emb", "query_proj", "query_bias", "know_proj", "know_bias")


@dataclass(frozen=True)
class DualEncoderParams:
    text_vocab: dict[str, int]
    know_vocab: dict[str, int]
    text_emb: np.ndarray    # (V_t, d)
    visual_emb: np.ndarray  # (V_v, d)
    know_emb: np.ndarray    # (V_k, d)
    query_proj: np.ndarray  # (d, d)
    query_bias: np.ndarray  # (d,)
    know_proj: np.ndarray   # (d, d)
    know_bias: np.ndarray   # (d,)
    seed: int = 0

    def __post_init__(self):
        d = self.dim
        if d < 2:
            raise ValueError("embedding dimension must be >= 2")
        expected = {
            "text_emb": (len(self.text_vocab), d),
            "know_emb": (len(self.know_vocab), d),
            "query_proj": (d, d),
            "query_bias": (d,),
            "know_proj": (d, d),
            "know_bias": (d,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.visual_emb.ndim != 2 or self.visual_emb.shape[1] != d:
            raise ValueError("visual_emb must be (V_v, d)")
        for name in ("text_emb", "visual_emb", "know_emb"):
            if getattr(self, name).shape[0] < 2:
                raise ValueError(f"{name} needs UNK plus at least one real row")
        for name in TENSOR_NAMES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def dim(self) -> int:
        return self.query_bias.shape[0]

    @property
    def visual_vocab_size(self) -> int:
        return self.visual_emb.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TENSOR_NAMES}

    def with_tensors(self, **tensors: np.ndarray) -> "DualEncoderParams":
        return replace(self, **tensors)

    def copy(self) -> "DualEncoderParams":
        return self.with_tensors(**{k: v.copy() for k, v in self.tensors().items()})


def build_vocab(texts: Iterable[str], reserved: Sequence[str] = (UNK,)) -> dict[str, int]:
    """Reserved entries first (UNK is id 0), then every content term sorted."""
    words = set()
    for text in texts:
        words.update(terms(text))
    vocab = {w: i for i, w in enumerate(reserved)}
    for w in sorted(words - set(reserved)):
        vocab[w] = len(vocab)
    return vocab


def build_text_vocab(texts: Iterable[str]) -> dict[str, int]:
    return build_vocab(texts, (UNK, MASK_SURFACE))


def init_params(
    text_vocab: dict[str, int],
    know_vocab: dict[str, int],
    visual_vocab_size: int,
    dim: int = 64,
    seed: int = 0,
    scale: float = 0.1,
) -> DualEncoderParams:
    rng = np.random.default_rng(seed)

    def u(*shape):
        return rng.uniform(-scale, scale, size=shape)

    return DualEncoderParams(
        text_vocab=dict(text_vocab),
        know_vocab=dict(know_vocab),
        text_emb=u(len(text_vocab), dim),
        visual_emb=u(max(visual_vocab_size, 2), dim),
        know_emb=u(len(know_vocab), dim),
        query_proj=u(dim, dim),
        query_bias=u(dim),
        know_proj=u(dim, dim),
        know_bias=u(dim),
        seed=seed,
    )


def zero_params(params: DualEncoderParams) -> DualEncoderParams:
    return params.with_tensors(**{k: np.zeros_like(v) for k, v in params.tensors().items()})


class Bags(NamedTuple):
    """Flattened token ids of several items, with the owning item of each id."""

    ids: np.ndarray
    owner: np.ndarray
    counts: np.ndarray  # tokens per item, across every table


def _bags(id_lists: Sequence[Sequence[int]], counts: np.ndarray) -> Bags:
    ids = np.fromiter((i for lst in id_lists for i in lst), dtype=np.int64)
    owner = np.repeat(np.arange(len(id_lists)), [len(lst) for lst in id_lists])
    return Bags(ids, owner, counts)


def text_ids(text: str, vocab: dict[str, int]) -> list[int]:
    return [vocab.get(t, 0) for t in terms(text)]


def query_token_ids(q: MultimodalQuery, params: DualEncoderParams) -> tuple[list[int], list[int]]:
    bad = [v for v in q.visual_tokens if v >= params.visual_vocab_size]
    if bad:
        raise ValueError(f"query {q.id!r}: visual token {bad[0]} outside vocabulary of {params.visual_vocab_size}")
    t = text_ids(q.text, params.text_vocab)
    v = list(q.visual_tokens)
    if not t and not v:
        raise ValueError(f"query {q.id!r} has no tokens to encode")
    return t, v


def doc_token_ids(doc: KnowledgeDoc, params: DualEncoderParams) -> list[int]:
    ids = text_ids(doc.text, params.know_vocab)
    if not ids:
        raise ValueError(f"document {doc.id!r} has no tokens to encode")
    return ids


@dataclass
class QueryTokens:
    text: Bags
    visual: Bags

    @classmethod
    def of(cls, queries: Sequence[MultimodalQuery], params: DualEncoderParams) -> "QueryTokens":
        pairs = [query_token_ids(q, params) for q in queries]
        counts = np.array([len(t) + len(v) for t, v in pairs], dtype=np.float64)
        return cls(_bags([t for t, _ in pairs], counts), _bags([v for _, v in pairs], counts))

    def __len__(self):
        return len(self.text.counts)


@dataclass
class DocTokens:
    bag: Bags

    @classmethod
    def of(cls, docs: Sequence[KnowledgeDoc], params: DualEncoderParams) -> "DocTokens":
        lists = [doc_token_ids(d, params) for d in docs]
        counts = np.array([len(x) for x in lists], dtype=np.float64)
        return cls(_bags(lists, counts))

    def __len__(self):
        return len(self.bag.counts)


def _pool_into(out: np.ndarray, table: np.ndarray, bag: Bags) -> None:
    np.add.at(out, bag.owner, table[bag.ids])


def pool_queries(tokens: QueryTokens, params: DualEncoderParams) -> np.ndarray:
    h = np.zeros((len(tokens), params.dim))
    _pool_into(h, params.text_emb, tokens.text)
    _pool_into(h, params.visual_emb, tokens.visual)
    return h / tokens.text.counts[:, None]


def pool_docs(tokens: DocTokens, params: DualEncoderParams) -> np.ndarray:
    h = np.zeros((len(tokens), params.dim))
    _pool_into(h, params.know_emb, tokens.bag)
    return h / tokens.bag.counts[:, None]


def head(h: np.ndarray, proj: np.ndarray, bias: np.ndarray) -> np.ndarray:
    return np.tanh(h @ proj.T + bias)


def encode_queries(queries: Sequence[MultimodalQuery], params: DualEncoderParams) -> np.ndarray:
    if not queries:
        return np.zeros((0, params.dim))
    h = pool_queries(QueryTokens.of(queries, params), params)
    return head(h, params.query_proj, params.query_bias)


def encode_docs(docs: Sequence[KnowledgeDoc], params: DualEncoderParams) -> np.ndarray:
    if not docs:
        return np.zeros((0, params.dim))
    h = pool_docs(DocTokens.of(docs, params), params)
    return head(h, params.know_proj, params.know_bias)


def encode_query(q: MultimodalQuery, params: DualEncoderParams) -> np.ndarray:
    return encode_queries([q], params)[0]


def encode_knowledge(doc: KnowledgeDoc, params: DualEncoderParams) -> np.ndarray:
    return encode_docs([doc], params)[0]


def relevance_score(q: MultimodalQuery, doc: KnowledgeDoc, params: DualEncoderParams) -> float:
    return float(encode_query(q, params) @ encode_knowledge(doc, params))


# -- persistence -------------------------------------------------------------

def _vocab_block(vocab: dict[str, int]) -> bytes:
    raw = "".join(f"{tok}\t{i}\n" for tok, i in sorted(vocab.items(), key=lambda kv: kv[1])).encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _read_vocab(data: bytes, pos: int) -> tuple[dict[str, int], int]:
    (n,) = struct.unpack_from("<I", data, pos)
    pos += 4
    vocab = {}
    for line in data[pos:pos + n].decode("utf-8").splitlines():
        tok, idx = line.split("\t")
        vocab[tok] = int(idx)
    return vocab, pos + n


def save_params(params: DualEncoderParams, path) -> None:
    header = MAGIC + struct.pack(
        "<IIIIq", params.dim, len(params.text_vocab), params.visual_vocab_size, len(params.know_vocab), params.seed
    )
    body = [header, _vocab_block(params.text_vocab), _vocab_block(params.know_vocab)]
    body += [np.ascontiguousarray(t, dtype="<f8").tobytes() for t in params.tensors().values()]
    with open(path, "wb") as f:
        f.write(b"".join(body))


def load_params(path) -> DualEncoderParams:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a dual-encoder params file")
    d, vt, vv, vk, seed = struct.unpack_from("<IIIIq", data, 4)
    pos = 4 + struct.calcsize("<IIIIq")
    text_vocab, pos = _read_vocab(data, pos)
    know_vocab, pos = _read_vocab(data, pos)
    shapes = {
        "text_emb": (vt, d), "visual_emb": (vv, d), "know_emb": (vk, d),
        "query_proj": (d, d), "query_bias": (d,), "know_proj": (d, d), "know_bias": (d,),
    }
    tensors = {}
    for name in TENSOR_NAMES:
        n = int(np.prod(shapes[name]))
        tensors[name] = np.frombuffer(data, dtype="<f8", count=n, offset=pos).astype(np.float64).reshape(shapes[name])
        pos += 8 * n
    if pos != len(data):
        raise ValueError(f"{path}: {len(data) - pos} trailing bytes")
    return DualEncoderParams(text_vocab, know_vocab, seed=seed, **tensors)
