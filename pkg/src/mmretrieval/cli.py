"""``mmr``: forge, index, train, mine, retrieve, evaluate and sweep.

Every subcommand writes its fully resolved flags as JSON next to its
outputs (``<output>.config.json``, or ``config.json`` inside an output
directory). Exit status: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import core, dense, encoder, forge, metrics, pipeline, sparse, trainer

log = logging.getLogger("mmretrieval")

SWEEP_METRICS = ("MRR@5", "R@5", "R@10", "R@20", "R@50", "R@100")


class InputMissing(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    flags: dict = field(default_factory=dict)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps({"command": self.command, "flags": self.flags}, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text())
        return cls(data["command"], data["flags"])

    def argv(self) -> list[str]:
        """Flags turned back into a command line for :func:`main`."""
        out = [self.command]
        for key, val in self.flags.items():
            flag = "--" + key.replace("_", "-")
            if val is None or val is False:
                continue
            if val is True:
                out.append(flag)
            elif isinstance(val, list):
                out += [flag, ",".join(str(v) for v in val)]
            else:
                out += [flag, str(val)]
        return out


def _need(*paths) -> None:
    for p in paths:
        if p is not None and not os.path.exists(p):
            raise InputMissing(p)


def _record(args, out_path, is_dir: bool = False) -> None:
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    target = Path(out_path) / "config.json" if is_dir else Path(f"{out_path}.config.json")
    ExperimentConfig(args.command, flags).save(target)


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _threads(value) -> int:
    if value is not None:
        return max(1, value)
    return max(1, int(os.environ.get("MMR_THREADS") or os.cpu_count() or 1))


# -- subcommands ------------------------------------------------------------------

def cmd_forge_remuq(args) -> None:
    _need(args.webqa, args.visual_tokens)
    records = forge.load_webqa(args.webqa)
    vis = forge.load_visual_tokens(args.visual_tokens) if args.visual_tokens else None
    built = forge.build_remuq(records, args.keyword_top_n, args.train_frac, args.seed, args.keyword_source)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    core.write_corpus(out / "corpus.jsonl", built.corpus)
    core.write_queries(out / "train_queries.jsonl", [s.to_query(vis) for s in built.train])
    core.write_queries(out / "test_queries.jsonl", [s.to_query(vis) for s in built.test])
    (out / "forge-manifest.json").write_text(json.dumps(built.manifest, indent=2) + "\n")
    _record(args, out, is_dir=True)
    m = built.manifest
    print(f"train={m['train']} test={m['test']} corpus={m['corpus']}")


def cmd_forge_vlict(args) -> None:
    _need(args.wit, args.visual_tokens)
    records = forge.load_wit(args.wit)
    vis = forge.load_visual_tokens(args.visual_tokens) if args.visual_tokens else None
    built = forge.build_vlict(records, args.mask_ratio, args.seed, args.random_sentence)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    forge.write_triplets(out / "triplets.jsonl", built.triplets, vis)
    manifest = dict(built.manifest, skipped_records=built.skipped)
    (out / "forge-manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    _record(args, out, is_dir=True)
    print(f"triplets={len(built.triplets)} skipped={len(built.skipped)}")


def cmd_index_bm25(args) -> None:
    _need(args.corpus)
    docs, _ = core.load_corpus(args.corpus)
    sparse.save_bm25_index(sparse.build_bm25_index(docs, args.k1, args.b), args.out)
    _record(args, args.out)


def cmd_index_dense(args) -> None:
    _need(args.corpus, args.params)
    docs, _ = core.load_corpus(args.corpus)
    params = encoder.load_params(args.params)
    dense.save_embeddings(dense.build_embedding_index(docs, params), args.out)
    _record(args, args.out)


def _training_data(args):
    if args.triplets:
        _need(args.triplets)
        pairs = forge.load_triplets(args.triplets)
        data = [trainer.Example(q, d) for q, d in pairs]
        corpus = [d for _, d in pairs]
        if args.corpus:
            _need(args.corpus)
            corpus += core.load_corpus(args.corpus)[0]
        return data, corpus
    if not (args.queries and args.corpus):
        raise ValueError("train needs --triplets, or --queries together with --corpus")
    _need(args.queries, args.corpus)
    corpus, _ = core.load_corpus(args.corpus)
    return pipeline.examples_from_queries(core.load_queries(args.queries), corpus), corpus


def cmd_train(args) -> None:
    _need(args.init_params, args.hard_negatives)
    data, corpus = _training_data(args)
    if args.init_params:
        params = encoder.load_params(args.init_params)
    else:
        params = pipeline.fresh_params(
            data, args.dim, args.seed, extra_docs=corpus,
            visual_vocab_size=args.visual_vocab, init_scale=args.init_scale,
        )
    if args.hard_negatives:
        mined = {str(rec["qid"]): list(rec["neg_ids"]) for _, rec in core.iter_jsonl(args.hard_negatives)}
        data = trainer.attach_negatives(data, mined, corpus)
    config = trainer.TrainConfig(args.lr, args.epochs, args.batch_size, args.seed, args.negatives_per_query)
    params, losses = trainer.train(data, config, params, lambda e, l: log.info("epoch %d loss %.6f", e, l))
    encoder.save_params(params, args.out)
    Path(f"{args.out}.log.json").write_text(json.dumps({"epoch_loss": losses}, indent=2) + "\n")
    _record(args, args.out)
    print(f"epochs={len(losses)} first_loss={losses[0]:.6f} final_loss={losses[-1]:.6f}")


def cmd_mine_negatives(args) -> None:
    _need(args.params, args.corpus, args.queries)
    params = encoder.load_params(args.params)
    docs, _ = core.load_corpus(args.corpus)
    mined = trainer.mine_hard_negatives(params, docs, core.load_queries(args.queries), args.depth)
    core.write_jsonl(args.out, ({"qid": q, "neg_ids": ids} for q, ids in mined.items()))
    _record(args, args.out)


def cmd_retrieve(args) -> None:
    _need(args.queries, args.index, args.params, args.embeddings, args.corpus)
    queries = core.load_queries(args.queries)
    threads = _threads(args.threads)
    if args.mode == "bm25":
        if not args.index:
            raise ValueError("--mode bm25 needs --index")
        run = pipeline.bm25_run(sparse.load_bm25_index(args.index), queries, args.k, threads)
    else:
        if not args.params or not (args.embeddings or args.corpus):
            raise ValueError(f"--mode {args.mode} needs --params and --embeddings (or --corpus)")
        params = encoder.load_params(args.params)
        if args.embeddings:
            index = dense.load_embeddings(args.embeddings)
        else:
            index = dense.build_embedding_index(core.load_corpus(args.corpus)[0], params)
        if args.mode == "dense":
            run = pipeline.dense_run(params, index, queries, args.k, threads)
        else:
            run = pipeline.fusion_run(params, index, queries, args.k, args.m, threads)
    core.write_run(run, args.out)
    _record(args, args.out)


def cmd_evaluate(args) -> None:
    _need(args.run, args.qrels, args.queries, args.corpus)
    if args.qrels:
        judgments = metrics.RelevanceJudgments.load(args.qrels)
    elif args.queries and args.answer_span:
        if not args.corpus:
            raise ValueError("--answer-span needs --corpus")
        judgments = metrics.RelevanceJudgments.from_answers(
            core.load_queries(args.queries), core.load_corpus(args.corpus)[0], args.token_boundary
        )
    elif args.queries:
        judgments = metrics.RelevanceJudgments.from_queries(core.load_queries(args.queries))
    else:
        raise ValueError("evaluate needs --qrels or --queries")
    report = metrics.evaluate_run(core.load_run(args.run), judgments, args.k_list)
    Path(args.out).write_text(json.dumps(report.to_json(), indent=2) + "\n")
    Path(args.out).with_suffix(".txt").write_text(report.table() + "\n")
    _record(args, args.out)
    print(report.table())


def cmd_sweep(args) -> None:
    _need(args.wit, args.visual_tokens, args.corpus, args.queries)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vis = forge.load_visual_tokens(args.visual_tokens)
    visual_vocab = 1 + max((v for toks in vis.values() for v in toks), default=1)
    k_max = max(int(m.split("@")[1]) for m in SWEEP_METRICS)
    rows = []
    for ratio in args.ratios:
        step = out / f"ratio_{ratio:g}"
        steps = [
            ["forge-vlict", "--wit", args.wit, "--visual-tokens", args.visual_tokens,
             "--mask-ratio", str(ratio), "--seed", str(args.seed), "--out-dir", str(step)],
            ["train", "--triplets", str(step / "triplets.jsonl"), "--out", str(step / "params.dep"),
             "--dim", str(args.dim), "--lr", str(args.lr), "--epochs", str(args.epochs),
             "--batch-size", str(args.batch_size), "--seed", str(args.seed),
             "--init-scale", str(args.init_scale), "--visual-vocab", str(visual_vocab)],
            ["index-dense", "--corpus", args.corpus, "--params", str(step / "params.dep"),
             "--out", str(step / "embeddings.emb")],
            ["retrieve", "--mode", "dense", "--queries", args.queries, "--params", str(step / "params.dep"),
             "--embeddings", str(step / "embeddings.emb"), "--k", str(k_max), "--out", str(step / "run.txt"),
             "--threads", str(_threads(args.threads))],
            ["evaluate", "--run", str(step / "run.txt"), "--queries", args.queries,
             "--k-list", "5,10,20,50,100", "--out", str(step / "report.json")],
        ]
        for argv in steps:
            code = main(argv)
            if code:
                raise RuntimeError(f"sweep step {argv[0]} failed for ratio {ratio}")
        report = json.loads((step / "report.json").read_text())["metrics"]
        rows.append([f"{ratio:g}"] + [f"{report[m]:.6f}" for m in SWEEP_METRICS])
    with open(out / "sweep.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["ratio", *SWEEP_METRICS])
        writer.writerows(rows)
    _record(args, out, is_dir=True)
    print((out / "sweep.csv").read_text(), end="")


# -- parser -------------------------------------------------------------------------

def _train_flags(p) -> None:
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-scale", type=float, default=pipeline.DEFAULT_INIT_SCALE)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forge-remuq", help="build a ReMuQ-style benchmark from WebQA-like records")
    p.add_argument("--webqa", required=True)
    p.add_argument("--visual-tokens")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--keyword-top-n", type=int, default=3)
    p.add_argument("--keyword-source", choices=forge.KEYWORD_SOURCES, default="corpus")
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_forge_remuq)

    p = sub.add_parser("forge-vlict", help="build VL-ICT triplets from WiT-like records")
    p.add_argument("--wit", required=True)
    p.add_argument("--visual-tokens")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--mask-ratio", type=float, default=0.0)
    p.add_argument("--random-sentence", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_forge_vlict)

    p = sub.add_parser("index-bm25", help="build and save a BM25 index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k1", type=float, default=1.2)
    p.add_argument("--b", type=float, default=0.75)
    p.set_defaults(func=cmd_index_bm25)

    p = sub.add_parser("index-dense", help="embed a corpus with trained params")
    p.add_argument("--corpus", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index_dense)

    p = sub.add_parser("train", help="contrastive training of the dual encoder")
    p.add_argument("--triplets")
    p.add_argument("--queries")
    p.add_argument("--corpus")
    p.add_argument("--hard-negatives")
    p.add_argument("--init-params")
    p.add_argument("--negatives-per-query", type=int, default=1)
    p.add_argument("--visual-vocab", type=int)
    p.add_argument("--out", required=True)
    _train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("mine-negatives", help="top-depth non-gold passages per query")
    p.add_argument("--params", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--depth", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mine_negatives)

    p = sub.add_parser("retrieve", help="write a run file")
    p.add_argument("--mode", choices=("bm25", "dense", "fusion"), required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--index")
    p.add_argument("--params")
    p.add_argument("--embeddings")
    p.add_argument("--corpus")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("evaluate", help="MRR@K / P@K / R@K of a run")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels")
    p.add_argument("--queries")
    p.add_argument("--corpus")
    p.add_argument("--answer-span", action="store_true")
    p.add_argument("--token-boundary", action="store_true")
    p.add_argument("--k-list", type=_int_list, default=list(metrics.DEFAULT_K))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-mask-ratio", help="forge, train, retrieve and evaluate per mask ratio")
    p.add_argument("--wit", required=True)
    p.add_argument("--visual-tokens", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--ratios", type=_float_list, default=[0.0, 0.1, 0.2, 0.3, 0.5])
    p.add_argument("--threads", type=int)
    p.add_argument("--out-dir", required=True)
    _train_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except InputMissing as exc:
        print(f"error: file not found: {exc.args[0]}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
