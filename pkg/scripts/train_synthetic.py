"""Train the blink classifier on synthetic sessions and report test metrics.

Writes weights, training curves and an evaluation CSV into ``--out``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from neuroarm.config import SimConfig
from neuroarm.sim import synthetic_dataset
from neuroarm.training import Split, TrainConfig, evaluate_dataset, train, write_curves


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/synthetic")
    ap.add_argument("--blink", type=int, default=500)
    ap.add_argument("--rest", type=int, default=500)
    ap.add_argument("--amplitude", type=float, default=5.0, help="blink peak in units of noise sigma")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=100)
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = SimConfig(seed=args.seed, blink_amplitude=args.amplitude)
    ds = synthetic_dataset(cfg, args.blink, args.rest, seed=args.seed)
    res = train(ds, TrainConfig(seed=args.seed, max_epochs=args.epochs))
    res.classifier.save(out / "weights.bin")
    write_curves(res.history, out / "curves.csv")
    report = evaluate_dataset(res.classifier, ds, Split.TEST)
    report.write_csv(out / "eval.csv")
    print(f"epochs {len(res.history)} (best {res.best_epoch})")
    for k, v in report.rows():
        print(f"{k}={v}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
