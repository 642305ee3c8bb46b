#!/usr/bin/env python3
"""Label-variant comparison on the bundled synthetic set.

Trains the per-frame model once per target variant and prints a results
table: a strongly aligned cross-entropy baseline, the soft alignment loss
with strongly aligned targets, duration-collapsed targets (which should
fail), collapsed-and-stretched targets (which should track the baseline),
and the two score-derived variants.
"""

import argparse
import sys
import time

from softalign import LabelVariant, LossKind, toy_config, toy_dataset, train

ROWS = [
    ("strong / cross-entropy", LabelVariant.STRONG, LossKind.PER_FRAME_CE),
    ("strong / softdtw", LabelVariant.STRONG, LossKind.SOFT_ALIGNMENT),
    ("w1 collapsed / softdtw", LabelVariant.COLLAPSE, LossKind.SOFT_ALIGNMENT),
    ("w2 collapsed+stretched / softdtw", LabelVariant.COLLAPSE_STRETCH, LossKind.SOFT_ALIGNMENT),
    ("w3 score / softdtw", LabelVariant.SCORE, LossKind.SOFT_ALIGNMENT),
    ("w4 score stretched / softdtw", LabelVariant.SCORE_STRETCH, LossKind.SOFT_ALIGNMENT),
]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--epochs", type=int, default=None, help="override the bundled epoch count")
    args = parser.parse_args(argv)

    data = toy_dataset()
    print(f"{'scenario':34s} {'F':>6s} {'CS':>6s} {'AP':>6s} {'Acc':>6s}")
    t0 = time.perf_counter()
    for label, variant, loss in ROWS:
        config = toy_config(variant, loss)
        if args.epochs is not None:
            config.epochs = args.epochs
        _, history = train(data, config)
        r = history[-1].report
        print(f"{label:34s} {r.f_measure:6.3f} {r.cosine_similarity:6.3f} "
              f"{r.average_precision:6.3f} {r.accuracy:6.3f}")
    print(f"total time {time.perf_counter() - t0:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
