"""Train on the synthetic task with full queries and score each modality alone.

    python3 scripts/both_modalities.py --seed 0 --out results/both_modalities.json
"""

import argparse
import json
from pathlib import Path

from mmretrieval.experiments import RunSetup, both_modalities


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--lr", type=float, default=0.1)
    ap.add_argument("--batch-size", type=int, default=16)
    ap.add_argument("--init-scale", type=float, default=RunSetup.init_scale)
    ap.add_argument("--out")
    args = ap.parse_args()
    setup = RunSetup(args.dim, args.lr, args.batch_size, args.epochs, args.seed, args.init_scale)
    res = both_modalities(setup)
    for name in ("full", "text_only", "image_only"):
        print(f"{name:<11} R@5={res[name]['R@5']:.3f} MRR@5={res[name]['MRR@5']:.3f}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(res, indent=2) + "\n")


if __name__ == "__main__":
    main()
