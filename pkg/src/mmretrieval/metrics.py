"""Relevance judgments and MRR@K / P@K / R@K."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .core import KnowledgeDoc, MultimodalQuery, iter_jsonl

DEFAULT_K = (5, 10, 20, 50, 100)


def normalize(text: str) -> str:
    return " ".join(text.lower().split())


def judge_relevance(doc: KnowledgeDoc, answers: Sequence[str], token_boundary: bool = False) -> bool:
    """True when some answer alias occurs in the document text.

    Both sides are lowercased with whitespace collapsed. With
    ``token_boundary`` the alias must also start and end on word boundaries.
    """
    if not answers:
        raise ValueError("need at least one answer alias")
    text = normalize(doc.text)
    for ans in answers:
        a = normalize(ans)
        if not a:
            continue
        if token_boundary:
            if re.search(rf"(?<!\w){re.escape(a)}(?!\w)", text):
                return True
        elif a in text:
            return True
    return False


@dataclass
class RelevanceJudgments:
    relevant: dict[str, set[str]]
    mode: str = "explicit-gold"

    def __post_init__(self):
        if self.mode not in ("explicit-gold", "answer-span"):
            raise ValueError(f"unknown judgment mode {self.mode!r}")

    @classmethod
    def from_queries(cls, queries: Iterable[MultimodalQuery]) -> "RelevanceJudgments":
        return cls({q.id: set(q.gold_ids) for q in queries})

    @classmethod
    def from_answers(
        cls, queries: Iterable[MultimodalQuery], corpus: Sequence[KnowledgeDoc], token_boundary: bool = False
    ) -> "RelevanceJudgments":
        rel = {}
        for q in queries:
            if not q.answers:
                rel[q.id] = set()
                continue
            rel[q.id] = {d.id for d in corpus if judge_relevance(d, q.answers, token_boundary)}
        return cls(rel, "answer-span")

    @classmethod
    def load(cls, path) -> "RelevanceJudgments":
        return cls({str(rec["qid"]): set(rec["relevant_ids"]) for _, rec in iter_jsonl(path)})

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for qid, ids in self.relevant.items():
                f.write(json.dumps({"qid": qid, "relevant_ids": sorted(ids)}) + "\n")


@dataclass
class MetricReport:
    values: dict[str, float] = field(default_factory=dict)
    query_count: int = 0

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def to_json(self) -> dict:
        return {"query_count": self.query_count, "metrics": dict(self.values)}

    def table(self) -> str:
        width = max(len(k) for k in self.values) if self.values else 6
        lines = [f"{'metric':<{width}}  value", f"{'-' * width}  ------"]
        lines += [f"{k:<{width}}  {v:.4f}" for k, v in self.values.items()]
        lines.append(f"{'queries':<{width}}  {self.query_count}")
        return "\n".join(lines)


def metric_names(k_list: Sequence[int]) -> list[str]:
    return [f"{m}@{k}" for m in ("MRR", "P", "R") for k in k_list]


def evaluate_run(
    run: Mapping[str, Sequence], judgments: RelevanceJudgments, k_list: Sequence[int] = DEFAULT_K
) -> MetricReport:
    """Mean MRR@K, P@K and R@K over every judged query.

    Judged queries missing from ``run`` count as empty rankings. A query
    with no relevant documents scores zero on every metric.
    """
    if not k_list or any(k < 1 for k in k_list):
        raise ValueError("k_list must be non-empty with every k >= 1")
    for qid in run:
        if qid not in judgments.relevant:
            raise ValueError(f"query {qid!r} in run has no relevance judgments")
    sums = dict.fromkeys(metric_names(k_list), 0.0)
    qids = sorted(judgments.relevant)
    for qid in qids:
        rel = judgments.relevant[qid]
        ranked = [h.doc_id for h in run.get(qid, ())]
        first = next((r for r, d in enumerate(ranked, 1) if d in rel), None)
        for k in k_list:
            found = sum(1 for d in ranked[:k] if d in rel)
            sums[f"MRR@{k}"] += 1.0 / first if first is not None and first <= k else 0.0
            sums[f"P@{k}"] += found / k
            sums[f"R@{k}"] += found / len(rel) if rel else 0.0
    n = len(qids)
    return MetricReport({name: (s / n if n else 0.0) for name, s in sums.items()}, n)
