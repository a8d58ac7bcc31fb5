#!/usr/bin/env python3
"""Compare the full model with its global-view ablations on the synthetic fixture."""
import argparse
import tempfile

import numpy as np

from glory.config import HyperParams, RunConfig
from glory.experiments import synthetic_setup, train_and_score

VARIANTS = {
    "full": {},
    "no-global-news": {"use_global_news": False},
    "no-global-entity": {"use_global_entity": False},
    "neither": {"use_global_news": False, "use_global_entity": False},
}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--n-impressions", type=int, default=50)
    args = p.parse_args()

    print("variant\tseed\tparams\tauc\tmean_loss\tfinal_loss")
    with tempfile.TemporaryDirectory() as tmp:
        bundle, graphs = synthetic_setup(tmp, HyperParams(), n_impressions=args.n_impressions)
        for seed in args.seeds:
            run = RunConfig(epochs=args.epochs, batch_size=args.batch_size, seed=seed)
            for name, flags in VARIANTS.items():
                out = train_and_score(bundle, graphs, HyperParams(**flags), run)
                print(f"{name}\t{seed}\t{out.num_parameters}\t{out.auc:.4f}\t"
                      f"{np.mean(out.epoch_losses):.4f}\t{out.epoch_losses[-1]:.2e}", flush=True)


if __name__ == "__main__":
    main()
