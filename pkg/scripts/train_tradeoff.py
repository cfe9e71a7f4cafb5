"""Train the MLP mask estimator under several losses on a synthetic corpus
and compare them on held-out mixtures.

Example:
    python scripts/train_tradeoff.py --losses 2cl:0.1 2cl:0.9 3cl mse --epochs 50
"""

import argparse
import time

import numpy as np

from components_loss import synth, trainer
from components_loss.components import apply_mask, components_to_time
from components_loss.config import TrainConfig, default_weights
from components_loss.metrics import evaluate
from components_loss.stft import analyze


def parse_setting(text):
    """``loss`` or ``loss:alpha`` or ``loss:alpha:beta``."""
    name, *values = text.split(":")
    weights = default_weights(name)
    if values:
        weights = weights.with_overrides(alpha=float(values[0]),
                                         beta=float(values[1]) if len(values) > 1 else None)
    return name, weights


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--losses", nargs="+", default=["2cl:0.1", "2cl:0.9"])
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--train", type=int, default=20, help="training utterances")
    parser.add_argument("--test", type=int, default=4, help="held-out utterances")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    corpus = synth.corpus(args.train, seed=100 + args.seed)
    held_out = synth.corpus(args.test, seed=900 + args.seed, snrs=(0, 5))

    print(f"{'setting':<14} {'val ratio':>9} {'dSNR':>7} {'SSDR':>7} {'NA_seg':>7} {'|WLAKR|':>8} {'stoi':>6} {'time':>6}")
    for setting in args.losses:
        name, weights = parse_setting(setting)
        data = trainer.build_dataset(corpus, name, weights)
        train, val = trainer.split_by_utterance(data, 0.2, seed=args.seed)
        start = time.perf_counter()
        model, hist = trainer.mlp_train(trainer.init_model(seed=args.seed), train, val,
                                        TrainConfig(loss=name, weights=weights, epochs=args.epochs,
                                                    seed=args.seed))
        elapsed = time.perf_counter() - start
        reports = []
        for y, s, d in held_out:
            Y, S, D = analyze(y), analyze(s), analyze(d)
            mask = trainer.estimate_mask(model, y)
            reports.append(evaluate(s, d, *components_to_time(apply_mask(Y, S, D, mask))))
        mean = {k: np.mean([r.table_row()[k] for r in reports]) for k in reports[0].table_row()}
        print(f"{setting:<14} {hist.val_loss[-1] / hist.val_loss[0]:>9.3f} {mean['delta_snr']:>7.2f} "
              f"{mean['ssdr']:>7.2f} {mean['na_seg']:>7.2f} {mean['wlakr_abs']:>8.4f} "
              f"{mean['stoi_proxy']:>6.3f} {elapsed:>5.0f}s")


if __name__ == "__main__":
    main()
