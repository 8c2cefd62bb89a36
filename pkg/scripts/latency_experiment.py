"""Latency sweep over EMG envelope frame rates and link loss.

Prints per-pathway command and end-to-end latency means for each setting and
optionally writes them to a CSV.

    python scripts/latency_experiment.py --out latency_sweep.csv
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from neuroarm.config import SimConfig
from neuroarm.generators import CalibrationScenario, EegScenario, EmgScenario
from neuroarm.sim import default_classifier, run_simulation


def scenarios(n: int, contraction_ms: float):
    blinks = [(1000.0 + 2000.0 * i, 300.0) for i in range(n)]
    contractions = [(1500.0 + 2000.0 * i, contraction_ms, "strong") for i in range(n)]
    duration = 2000.0 * n + 2000.0
    return [CalibrationScenario(), EegScenario(duration, blinks), EmgScenario(duration, contractions)]


def mean(xs):
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else float("nan")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frame-hz", type=float, nargs="+", default=[20.0, 40.0])
    ap.add_argument("--loss", type=float, nargs="+", default=[0.0, 0.1, 0.3])
    ap.add_argument("--events", type=int, default=9)
    ap.add_argument("--contraction-ms", type=float, default=600.0)
    ap.add_argument("--seeds", type=int, default=5, help="runs per setting (seeds 0..n-1)")
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    rows = []
    for hz in args.frame_hz:
        for p in args.loss:
            recs = {"eeg": [], "emg": []}
            halts = 0
            for seed in range(args.seeds):
                cfg = SimConfig(seed=seed, emg_frame_hz=hz, loss_probability=p, heartbeat_ms=500)
                res = run_simulation(cfg, scenarios(args.events, args.contraction_ms), default_classifier(cfg))
                halts += res.halted_at is not None
                for name in recs:
                    recs[name] += res.latency.pathway(name)
            for name, rs in recs.items():
                rows.append({
                    "emg_frame_hz": hz,
                    "loss": p,
                    "pathway": name,
                    "commands": len(rs),
                    "delivered": sum(r.delivered_ms is not None for r in rs),
                    "command_mean_ms": round(mean(r.command_latency for r in rs), 1),
                    "end_to_end_mean_ms": round(mean(r.latency for r in rs), 1),
                    "halted_runs": halts,
                })
    writer = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
