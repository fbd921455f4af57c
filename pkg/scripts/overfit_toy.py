#!/usr/bin/env python3
"""Train on the built-in 8-sentence toy corpus until it is memorized.

Writes the toy dataset into a work directory, runs the 50-epoch toy recipe,
and reports the first epoch with perfect train F1. Finishes in well under a
minute on a laptop CPU.

    python scripts/overfit_toy.py [--workdir DIR] [--seed N]
"""

import argparse
import json
import sys
import tempfile
import time

from aste_dual.toy import toy_config, write_toy_dataset
from aste_dual.training import train


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default=None, help="where to write the toy files")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    workdir = args.workdir or tempfile.mkdtemp(prefix="aste-toy-")
    paths = write_toy_dataset(workdir)
    overrides = {"track_train_f1": True}
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = toy_config(**overrides)

    started = time.time()
    ckpt, history = train(
        cfg,
        train_path=paths["corpus"],
        dev_path=paths["corpus"],
        annotation_paths=paths["sidecar"],
        glove_path=paths["glove"],
        domain_emb_path=paths["domain"],
        checkpoint_out=f"{workdir}/toy.ckpt",
    )
    elapsed = time.time() - started

    for entry in history:
        print(
            f"epoch {entry['epoch']:2d}  loss {entry['loss']:.4f}  "
            f"train F1 {entry['train']['f1']:.3f}"
        )
    perfect = [h["epoch"] for h in history if h["train"]["f1"] == 1.0]
    print(
        json.dumps(
            {
                "workdir": workdir,
                "seconds": round(elapsed, 1),
                "first_perfect_epoch": perfect[0] if perfect else None,
                "best_epoch": ckpt.epoch,
            }
        )
    )
    return 0 if perfect else 1


if __name__ == "__main__":
    sys.exit(main())
