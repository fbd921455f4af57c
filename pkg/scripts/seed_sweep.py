#!/usr/bin/env python3
"""Train the same configuration under several seeds and report the best run.

    python scripts/seed_sweep.py --train T --dev D --annotations A \
        --glove G --domain-emb S --seeds 1 2 3 [--config F] [--out DIR]

Each run saves its checkpoint under the output directory; the summary names
the winning seed by dev F1.
"""

import argparse
import json
import sys
from pathlib import Path

from aste_dual.config import ModelConfig, load_config
from aste_dual.training import train


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config")
    parser.add_argument("--train", required=True)
    parser.add_argument("--dev", required=True)
    parser.add_argument("--test")
    parser.add_argument("--annotations", action="append", required=True)
    parser.add_argument("--glove")
    parser.add_argument("--domain-emb", dest="domain_emb")
    parser.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    parser.add_argument("--out", default="sweep")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for seed in args.seeds:
        config = load_config(args.config) if args.config else ModelConfig()
        config.seed = seed
        ckpt_path = out / f"seed{seed}.ckpt"
        ckpt, history = train(
            config,
            train_path=args.train,
            dev_path=args.dev,
            annotation_paths=args.annotations,
            glove_path=args.glove,
            domain_emb_path=args.domain_emb,
            test_path=args.test,
            checkpoint_out=ckpt_path,
        )
        best = ckpt.best_metric.to_dict() if ckpt.best_metric else {}
        results.append({"seed": seed, "checkpoint": str(ckpt_path), **best})
        print(json.dumps(results[-1]))

    winner = max(results, key=lambda r: r.get("f1", 0.0))
    print(json.dumps({"winner": winner}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
