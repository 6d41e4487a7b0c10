"""In-batch negatives only vs. mine-then-finetune, same total epochs, over several seeds.

    python3 scripts/hard_negative_ablation.py --seeds 0,1,2 --warmup-epochs 50 --finetune-epochs 10
"""

import argparse
import json
from pathlib import Path

from mmretrieval.experiments import RunSetup, hard_negative_ablation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="0")
    ap.add_argument("--warmup-epochs", type=int, default=50)
    ap.add_argument("--finetune-epochs", type=int, default=10)
    ap.add_argument("--depth", type=int, default=100)
    ap.add_argument("--negatives-per-query", type=int, default=1)
    ap.add_argument("--out")
    args = ap.parse_args()
    rows = []
    print("seed  in-batch  mined+finetune  warm-start")
    for seed in (int(s) for s in args.seeds.split(",")):
        res = hard_negative_ablation(
            RunSetup(epochs=args.warmup_epochs, seed=seed), args.finetune_epochs, args.depth, args.negatives_per_query
        )
        rows.append(res)
        print(f"{seed:<5} {res['in_batch_mrr5']:.4f}    {res['hard_negative_mrr5']:.4f}          {res['warm_start_mrr5']:.4f}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(rows, indent=2) + "\n")


if __name__ == "__main__":
    main()
