#!/usr/bin/env python3
"""Train on the 50-impression synthetic fixture and report AUC on its own impressions."""
import argparse
import logging
import tempfile

from glory.config import HyperParams, RunConfig
from glory.experiments import synthetic_setup, train_and_score, untrained_auc


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--small", action="store_true", help="tiny dimensions for a quick look")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    hp = HyperParams(d_model=16, word_dim=16, entity_dim=8, pool_dim=8, heads=2) if args.small else HyperParams()
    with tempfile.TemporaryDirectory() as tmp:
        bundle, graphs = synthetic_setup(tmp, hp, seed=args.seed)
        before = untrained_auc(bundle, graphs, hp, seed=args.seed)
        run = RunConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr, seed=args.seed)
        out = train_and_score(bundle, graphs, hp, run)
    print(f"untrained AUC {before:.4f}")
    print(f"trained AUC   {out.auc:.4f} after {args.epochs} epochs ({out.seconds:.0f}s)")
    print("epoch losses  " + " ".join(f"{x:.4f}" for x in out.epoch_losses))


if __name__ == "__main__":
    main()
