"""Generated retrieval task where the gold passage needs both query modalities.

Every document pairs one visual cue with one text cue. A query shows the
visual cue as a visual token and names the text cue in words; either cue
alone matches many documents, only the pair identifies one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import KnowledgeDoc, MultimodalQuery
from .trainer import Example

# visual token 0 is left unused, mirroring the UNK row of the text tables
_NOISE_VISUAL = 10
_DOC_FILLERS = 40
_QUERY_FILLERS = 30
_TEMPLATES = (
    "which one has {cue} {f}",
    "the item with {cue} and {f}",
    "find something that is {cue} {f}",
    "what shows {cue} {f}",
)


@dataclass(frozen=True)
class SyntheticTask:
    corpus: list[KnowledgeDoc]
    train: list[MultimodalQuery]
    test: list[MultimodalQuery]
    visual_vocab_size: int
    cue_of: dict[str, tuple[int, int]]  # doc id -> (visual cue, text cue)

    def examples(self, queries=None) -> list[Example]:
        by_id = {d.id: d for d in self.corpus}
        return [Example(q, by_id[q.gold_ids[0]]) for q in (self.train if queries is None else queries)]


def both_modalities_task(
    n_docs: int = 200,
    n_visual: int = 14,
    n_text: int = 15,
    train_per_doc: int = 3,
    seed: int = 0,
) -> SyntheticTask:
    """Build the task; combinations are dropped along a diagonal so cue counts stay balanced."""
    excess = n_visual * n_text - n_docs
    if excess < 0 or excess > min(n_visual, n_text):
        raise ValueError("corpus size must be within min(n_visual, n_text) of the full cue grid")
    rng = np.random.default_rng(seed)
    dropped = {(i, i) for i in range(excess)}
    pairs = [p for p in itertools.product(range(n_visual), range(n_text)) if p not in dropped]

    corpus, cue_of = [], {}
    for n, (v, t) in enumerate(pairs):
        fill = " ".join(f"kf{j}" for j in rng.choice(_DOC_FILLERS, size=2, replace=False))
        doc = KnowledgeDoc(f"d{n:04d}", f"obj{v} prop{t} {fill}")
        corpus.append(doc)
        cue_of[doc.id] = (v, t)

    vis_base = 1
    noise_base = vis_base + n_visual

    def query(qid: str, doc: KnowledgeDoc) -> MultimodalQuery:
        v, t = cue_of[doc.id]
        noise = rng.choice(_NOISE_VISUAL, size=2, replace=False) + noise_base
        tokens = [vis_base + v, *noise.tolist()]
        rng.shuffle(tokens)
        text = _TEMPLATES[rng.integers(len(_TEMPLATES))].format(cue=f"prop{t}", f=f"qf{rng.integers(_QUERY_FILLERS)}")
        return MultimodalQuery(qid, text, tuple(tokens), (doc.id,))

    train = [query(f"tr{d.id}-{r}", d) for d in corpus for r in range(train_per_doc)]
    test = [query(f"te{d.id}", d) for d in corpus]
    return SyntheticTask(corpus, train, test, noise_base + _NOISE_VISUAL, cue_of)
