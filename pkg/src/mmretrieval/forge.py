"""Dataset construction: ReMuQ-style benchmarks from WebQA-like records and
VL-ICT triplets from WiT-like records.

Images never appear directly; records carry an ``image_ref`` that a
visual-token map (``{"image_ref": str, "visual_tokens": [int]}`` per line)
resolves to the discrete token sequence the query encoder consumes.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import KnowledgeDoc, MultimodalQuery, iter_jsonl, write_jsonl
from .textproc import (
    MASK,
    MASK_SURFACE,
    TfIdfModel,
    content_terms,
    remove_terms,
    split_sentences,
    stopwords,
    tfidf_keywords,
    word_spans,
)

KEYWORD_SOURCES = ("corpus", "questions")


@dataclass(frozen=True)
class Choice:
    kind: str  # "text" or "image"
    content: str
    is_answer: bool = False


@dataclass(frozen=True)
class WebQaRecord:
    qid: str
    question: str
    choices: tuple[Choice, ...]
    image_ref: str = ""

    def __post_init__(self):
        if not self.question.strip():
            raise ValueError(f"record {self.qid!r} has an empty question")
        if not self.choices:
            raise ValueError(f"record {self.qid!r} has no choices")

    @classmethod
    def from_json(cls, rec: dict) -> "WebQaRecord":
        choices = tuple(
            Choice(c["kind"], c["content"], bool(c.get("is_answer", False))) for c in rec.get("choices", ())
        )
        return cls(str(rec["qid"]), rec.get("question", ""), choices, rec.get("image_ref", ""))

    def has_both_answer_kinds(self) -> bool:
        kinds = {c.kind for c in self.choices if c.is_answer}
        return {"text", "image"} <= kinds


@dataclass(frozen=True)
class RemuqSample:
    qid: str
    augmented_question: str
    image_ref: str
    gold_knowledge_id: str
    removed_keywords: tuple[str, ...] = ()

    def to_query(self, visual_tokens: dict[str, list[int]] | None = None) -> MultimodalQuery:
        tokens = resolve_image(self.image_ref, visual_tokens)
        return MultimodalQuery(self.qid, self.augmented_question, tuple(tokens), (self.gold_knowledge_id,))


@dataclass
class RemuqBuild:
    train: list[RemuqSample]
    test: list[RemuqSample]
    corpus: list[KnowledgeDoc]
    manifest: dict = field(default_factory=dict)


def knowledge_id(text: str) -> str:
    """Content-derived id, stable across subsets and record order."""
    return "k" + hashlib.sha1(text.encode("utf-8")).hexdigest()[:16]


def build_remuq(
    records: Sequence[WebQaRecord],
    top_n: int = 3,
    train_frac: float = 0.7,
    seed: int = 0,
    keyword_source: str = "corpus",
) -> RemuqBuild:
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie strictly between 0 and 1")
    if keyword_source not in KEYWORD_SOURCES:
        raise ValueError(f"keyword_source must be one of {KEYWORD_SOURCES}")

    kept = [r for r in records if r.has_both_answer_kinds()]
    if not kept:
        raise ValueError("no record has both an image and a text answer")

    corpus: dict[str, KnowledgeDoc] = {}
    for r in kept:
        for c in r.choices:
            if c.kind == "text" and c.content.strip() and c.content not in corpus:
                corpus[c.content] = KnowledgeDoc(knowledge_id(c.content), c.content)
    if len({d.id for d in corpus.values()}) != len(corpus):
        raise ValueError("knowledge id collision")

    ref_texts = list(corpus) if keyword_source == "corpus" else [r.question for r in kept]
    model = TfIdfModel.fit(ref_texts)

    samples = []
    for r in kept:
        gold = next(c for c in r.choices if c.is_answer and c.kind == "text")
        if not gold.content.strip():
            raise ValueError(f"record {r.qid!r} has an empty text answer")
        keywords = tfidf_keywords(r.question, model, top_n)
        samples.append(RemuqSample(
            r.qid, remove_terms(r.question, keywords), r.image_ref, corpus[gold.content].id, tuple(keywords)
        ))

    order = np.random.default_rng(seed).permutation(len(samples))
    n_train = int(math.floor(train_frac * len(samples)))
    train_idx, test_idx = sorted(order[:n_train]), sorted(order[n_train:])
    if not train_idx or not test_idx:
        raise ValueError(f"split of {len(samples)} samples at {train_frac} leaves an empty side")

    manifest = {
        "records_in": len(records),
        "records_kept": len(kept),
        "train": len(train_idx),
        "test": len(test_idx),
        "corpus": len(corpus),
        "seed": seed,
        "keyword_top_n": top_n,
        "train_frac": train_frac,
        "keyword_source": keyword_source,
    }
    return RemuqBuild(
        [samples[i] for i in train_idx], [samples[i] for i in test_idx], list(corpus.values()), manifest
    )


# -- VL-ICT --------------------------------------------------------------------

@dataclass(frozen=True)
class WitRecord:
    title_or_caption: str
    passage: str
    image_ref: str = ""
    id: str = ""
    is_english: bool = True

    @classmethod
    def from_json(cls, rec: dict) -> "WitRecord":
        return cls(
            rec.get("title_or_caption") or "",
            rec.get("passage") or "",
            rec.get("image_ref") or "",
            str(rec.get("id") or ""),
            bool(rec.get("is_english", True)),
        )


@dataclass(frozen=True)
class VlIctTriplet:
    qid: str
    text: str
    image_ref: str
    knowledge: str

    def to_json(self, visual_tokens: dict[str, list[int]] | None = None) -> dict:
        return {
            "qid": self.qid,
            "text": self.text,
            "visual_tokens": list(resolve_image(self.image_ref, visual_tokens)),
            "knowledge": self.knowledge,
        }


@dataclass(frozen=True)
class Skip:
    reason: str


def mask_overlap_keywords(sentence: str, caption: str, mask_ratio: float = 0.0, seed=0) -> str:
    """Mask every sentence word shared with the caption, then a random share of the rest.

    Only non-stopword tokens are candidates. After the overlap tokens are
    masked, ``ceil(mask_ratio * remaining)`` of the remaining content tokens
    are masked too, chosen with ``seed``. Unmasked text is left untouched.
    """
    if not 0 <= mask_ratio <= 1:
        raise ValueError("mask_ratio must be in [0, 1]")
    cap = set(content_terms(caption))
    sw = stopwords()
    content = [s for s in word_spans(sentence) if s[2] not in sw and s[2] != MASK_SURFACE]
    masked = [s for s in content if s[2] in cap]
    rest = [s for s in content if s[2] not in cap]
    n_extra = math.ceil(mask_ratio * len(rest) - 1e-9)
    if n_extra:
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(rest), size=n_extra, replace=False)
        masked += [rest[i] for i in picks]
    out, pos = [], 0
    for start, end, _ in sorted(masked):
        out.append(sentence[pos:start])
        out.append(MASK)
        pos = end
    out.append(sentence[pos:])
    return "".join(out)


def sentence_matches(sentence: str, caption_terms: set[str]) -> bool:
    return caption_terms <= set(content_terms(sentence))


def build_vlict_triplet(
    record: WitRecord,
    mask_ratio: float = 0.0,
    seed=0,
    random_sentence: bool = False,
    qid: str = "",
) -> VlIctTriplet | Skip:
    """Turn one WiT-style record into an (image, masked sentence, rest-of-passage) triplet.

    The sentence is the first one containing every content word of the
    title/caption (a seeded random matching one with ``random_sentence``).
    """
    if not 0 <= mask_ratio <= 1:
        raise ValueError("mask_ratio must be in [0, 1]")
    if not record.is_english:
        return Skip("non-english")
    caption_terms = set(content_terms(record.title_or_caption))
    if not caption_terms:
        return Skip("empty-caption")
    sentences = split_sentences(record.passage)
    if len(sentences) < 2:
        return Skip("too-few-sentences")
    matches = [i for i, s in enumerate(sentences) if sentence_matches(s, caption_terms)]
    if not matches:
        return Skip("no-match")
    rng = np.random.default_rng(seed)
    chosen = matches[int(rng.integers(len(matches)))] if random_sentence else matches[0]
    text = mask_overlap_keywords(sentences[chosen], record.title_or_caption, mask_ratio, rng)
    knowledge = " ".join(s for i, s in enumerate(sentences) if i != chosen)
    if text in knowledge:
        return Skip("sentence-leak")
    return VlIctTriplet(qid or record.id, text, record.image_ref, knowledge)


@dataclass
class VlIctBuild:
    triplets: list[VlIctTriplet]
    skipped: dict[str, str]  # record key -> reason
    manifest: dict = field(default_factory=dict)


def record_seed(seed: int, index: int) -> int:
    """Per-record seed from (run seed, record position); independent of scheduling."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def build_vlict(
    records: Sequence[WitRecord],
    mask_ratio: float = 0.0,
    seed: int = 0,
    random_sentence: bool = False,
) -> VlIctBuild:
    triplets, skipped = [], {}
    for i, rec in enumerate(records):
        key = rec.id or f"wit{i:06d}"
        out = build_vlict_triplet(rec, mask_ratio, record_seed(seed, i), random_sentence, qid=key)
        if isinstance(out, Skip):
            skipped[key] = out.reason
        else:
            triplets.append(out)
    manifest = {
        "records_in": len(records),
        "triplets": len(triplets),
        "skipped": len(skipped),
        "skip_reasons": dict(sorted(Counter(skipped.values()).items())),
        "mask_ratio": mask_ratio,
        "seed": seed,
        "random_sentence": random_sentence,
    }
    return VlIctBuild(triplets, skipped, manifest)


# -- I/O -------------------------------------------------------------------------

def load_webqa(path) -> list[WebQaRecord]:
    return [WebQaRecord.from_json(rec) for _, rec in iter_jsonl(path)]


def load_wit(path) -> list[WitRecord]:
    return [WitRecord.from_json(rec) for _, rec in iter_jsonl(path)]


def load_visual_tokens(path) -> dict[str, list[int]]:
    out = {}
    for lineno, rec in iter_jsonl(path):
        tokens = rec.get("visual_tokens") or []
        if any(not isinstance(v, int) or v < 0 for v in tokens):
            raise ValueError(f"{path}:{lineno}: visual tokens must be non-negative integers")
        out[str(rec["image_ref"])] = tokens
    return out


def resolve_image(image_ref: str, visual_tokens: dict[str, list[int]] | None) -> list[int]:
    if visual_tokens is None or not image_ref:
        return []
    if image_ref not in visual_tokens:
        raise KeyError(f"no visual tokens for image_ref {image_ref!r}")
    return list(visual_tokens[image_ref])


def write_triplets(path, triplets: Iterable[VlIctTriplet], visual_tokens=None) -> None:
    write_jsonl(path, (t.to_json(visual_tokens) for t in triplets))


def load_triplets(path) -> list[tuple[MultimodalQuery, KnowledgeDoc]]:
    """Triplets as (query, positive passage) pairs; passage ids are ``<qid>#k``."""
    out = []
    for _, rec in iter_jsonl(path):
        qid = str(rec["qid"])
        doc = KnowledgeDoc(f"{qid}#k", rec["knowledge"])
        q = MultimodalQuery(qid, rec.get("text") or "", tuple(rec.get("visual_tokens") or ()), (doc.id,))
        out.append((q, doc))
    return out
