"""Mask-ratio sweep on the checked-in fixtures, via the ``mmr`` command.

    python3 scripts/mask_ratio_sweep.py --out-dir results/sweep --ratios 0,0.1,0.2,0.3,0.5
"""

import argparse
import sys
from pathlib import Path

from mmretrieval.cli import main as mmr

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="results/sweep")
    ap.add_argument("--ratios", default="0,0.1,0.2,0.3,0.5")
    ap.add_argument("--seed", type=int, default=0)
    args, extra = ap.parse_known_args()  # extra flags (e.g. --epochs) go to the sweep
    return mmr([
        "sweep-mask-ratio",
        "--wit", str(FIXTURES / "wit.jsonl"),
        "--visual-tokens", str(FIXTURES / "visual_tokens.jsonl"),
        "--corpus", str(FIXTURES / "corpus.jsonl"),
        "--queries", str(FIXTURES / "queries.jsonl"),
        "--ratios", args.ratios,
        "--seed", str(args.seed),
        "--out-dir", args.out_dir,
        *extra,
    ])


if __name__ == "__main__":
    sys.exit(main())
