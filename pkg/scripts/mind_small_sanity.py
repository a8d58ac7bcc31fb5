#!/usr/bin/env python3
"""Train on a user subsample of MIND-small and report validation AUC.

Expects ``ROOT/MINDsmall_train`` and ``ROOT/MINDsmall_dev`` as distributed.
Pass ``--glove`` for pretrained word vectors (otherwise they are random).
"""
import argparse
import logging

from glory.config import HyperParams, RunConfig
from glory.experiments import mind_small_sanity


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("root")
    p.add_argument("--workdir", required=True)
    p.add_argument("--glove")
    p.add_argument("--users", type=int, default=5000)
    p.add_argument("--epochs", type=int, default=2)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    from threadpoolctl import threadpool_limits
    run = RunConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed, threads=args.threads)
    with threadpool_limits(limits=args.threads):
        out = mind_small_sanity(args.root, args.workdir, glove=args.glove, n_users=args.users,
                                hp=HyperParams(), run=run, seed=args.seed)
    print(f"validation AUC {out.auc:.4f} ({out.seconds:.0f}s)")


if __name__ == "__main__":
    main()
