"""Desk-scale experiments on the synthetic both-modalities task.

Shared by the scripts in ``scripts/`` and the acceptance suite.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .dense import build_embedding_index
from .metrics import RelevanceJudgments, evaluate_run
from .pipeline import DEFAULT_INIT_SCALE, dense_run, fresh_params
from .synthetic import SyntheticTask, both_modalities_task
from .trainer import TrainConfig, attach_negatives, mine_hard_negatives, train


@dataclass(frozen=True)
class RunSetup:
    dim: int = 64
    lr: float = 0.1
    batch_size: int = 16
    epochs: int = 50
    seed: int = 0
    init_scale: float = DEFAULT_INIT_SCALE

    def config(self, epochs: int | None = None, negatives_per_query: int = 1) -> TrainConfig:
        return TrainConfig(self.lr, self.epochs if epochs is None else epochs, self.batch_size, self.seed,
                           negatives_per_query)


def _init(task: SyntheticTask, setup: RunSetup):
    return fresh_params(task.examples(), setup.dim, setup.seed, extra_docs=task.corpus,
                        visual_vocab_size=task.visual_vocab_size, init_scale=setup.init_scale)


def _score(params, index, queries, k_list=(5, 10)):
    run = dense_run(params, index, queries, max(k_list))
    return evaluate_run(run, RelevanceJudgments.from_queries(queries), k_list)


def both_modalities(setup: RunSetup = RunSetup(), task: SyntheticTask | None = None) -> dict:
    """Train on full queries, then score full, text-only and image-only test queries."""
    task = task or both_modalities_task(seed=setup.seed)
    params, losses = train(task.examples(), setup.config(), _init(task, setup))
    index = build_embedding_index(task.corpus, params)
    out = {"setup": asdict(setup), "first_loss": losses[0], "final_loss": losses[-1]}
    for name, queries in (
        ("full", task.test),
        ("text_only", [q.text_only() for q in task.test]),
        ("image_only", [q.image_only() for q in task.test]),
    ):
        rep = _score(params, index, queries)
        out[name] = {"R@5": rep["R@5"], "MRR@5": rep["MRR@5"]}
    return out


def hard_negative_ablation(
    setup: RunSetup = RunSetup(),
    finetune_epochs: int = 10,
    depth: int = 100,
    negatives_per_query: int = 1,
    task: SyntheticTask | None = None,
) -> dict:
    """In-batch training, then mine and fine-tune, against in-batch only for the same total epochs."""
    task = task or both_modalities_task(seed=setup.seed)
    data = task.examples()
    init = _init(task, setup)
    warm, _ = train(data, setup.config(), init)

    mined = mine_hard_negatives(warm, task.corpus, task.train, depth)
    with_negs = attach_negatives(data, mined, task.corpus)
    tuned, _ = train(with_negs, setup.config(finetune_epochs, negatives_per_query), warm)

    baseline, _ = train(data, setup.config(setup.epochs + finetune_epochs), init)

    def mrr(params):
        return _score(params, build_embedding_index(task.corpus, params), task.test)["MRR@5"]

    return {
        "setup": asdict(setup),
        "finetune_epochs": finetune_epochs,
        "depth": depth,
        "in_batch_mrr5": mrr(baseline),
        "hard_negative_mrr5": mrr(tuned),
        "warm_start_mrr5": mrr(warm),
    }
