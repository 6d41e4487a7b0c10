"""Knowledge retrieval with multimodal (image + text) queries."""

from .core import KnowledgeDoc, MultimodalQuery, ScoredHit, load_corpus, load_queries, load_run, write_run
from .dense import EmbeddingMatrix, build_embedding_index, late_fusion_rerank, mips_topk
from .encoder import DualEncoderParams, encode_knowledge, encode_query, relevance_score
from .metrics import RelevanceJudgments, evaluate_run, judge_relevance
from .sparse import Bm25Index, bm25_search, build_bm25_index
from .trainer import Batch, TrainConfig, contrastive_loss, loss_gradient, mine_hard_negatives, train_epoch

__version__ = "0.1.0"

__all__ = [
    "Batch", "Bm25Index", "DualEncoderParams", "EmbeddingMatrix", "KnowledgeDoc", "MultimodalQuery",
    "RelevanceJudgments", "ScoredHit", "TrainConfig", "bm25_search", "build_bm25_index", "build_embedding_index",
    "contrastive_loss", "encode_knowledge", "encode_query", "evaluate_run", "judge_relevance", "late_fusion_rerank",
    "load_corpus", "load_queries", "load_run", "loss_gradient", "mine_hard_negatives", "mips_topk",
    "relevance_score", "train_epoch", "write_run",
]
