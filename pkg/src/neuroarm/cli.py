"""Command line entry point: simulate, replay, calibrate, train, eval, gen."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .blink import BlinkClassifier
from .config import SimConfig, read_config, write_config
from .generators import (
    CalibrationScenario,
    EegScenario,
    EmgScenario,
    blink_schedule,
    emg_session,
    gen_eeg,
    gen_emg,
    read_scenarios,
    run_calibration,
)
from .session import write_session
from .sim import replay_session, run_simulation, session_metadata, write_outputs
from .training import Split, TrainConfig, build_dataset, evaluate_dataset, train, write_curves

log = logging.getLogger("neuroarm")


def _config(args) -> SimConfig:
    cfg = read_config(args.config) if getattr(args, "config", None) else SimConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _config(args)
    scenarios = read_scenarios(args.scenario)
    clf = BlinkClassifier.load(args.weights) if args.weights else None
    result = run_simulation(cfg, scenarios, clf)
    write_outputs(result, args.out)
    for name in ("eeg", "emg"):
        s = result.latency.summary(name)
        if s["count"]:
            print(f"{name}: {int(s['count'])} commands, mean end-to-end "
                  f"{s.get('end_to_end_mean_ms', float('nan')):.1f} ms")
    if result.halted_at is not None:
        print(f"watchdog halt at {result.halted_at:.1f} ms")
    return 0


def cmd_replay(args) -> int:
    cfg = _config(args)
    clf = BlinkClassifier.load(args.weights) if args.weights else None
    res = replay_session(args.session, cfg, clf)
    text = "t_ms,event,detail\n" + "".join(line + "\n" for line in res.events + res.emg_commands)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"event precision={res.precision:.4f} recall={res.recall:.4f} (tp={res.tp} fp={res.fp} fn={res.fn})",
          file=sys.stderr)
    return 0


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    scenarios = read_scenarios(args.scenario)
    cal_sc = next((s for s in scenarios if isinstance(s, CalibrationScenario)), None)
    if cal_sc is None:
        raise ValueError("scenario file has no [calibration] section")
    cal = run_calibration(cfg, cal_sc)
    if args.out:
        write_config(args.out, cfg, {"calibration": cal.to_entries()})
    for k, v in cal.to_entries().items():
        print(f"{k}={v}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    dataset = build_dataset(args.data, cfg.W, cfg.S, args.seed, cfg.frame_ms, cfg.eeg_fs_hz, cfg.fc_eeg_hz)
    tcfg = TrainConfig(lr=args.lr, max_epochs=args.epochs, seed=args.seed, batch_size=args.batch_size,
                       patience=args.patience)
    result = train(dataset, tcfg)
    result.classifier.save(args.out)
    curves = Path(args.curves) if args.curves else Path(args.out).with_suffix(".curves.csv")
    write_curves(result.history, curves)
    report = evaluate_dataset(result.classifier, dataset, Split.VAL)
    print(f"trained {len(result.history)} epochs (best {result.best_epoch}); val accuracy {report.accuracy:.4f}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    clf = BlinkClassifier.load(args.weights)
    dataset = build_dataset(args.data, cfg.W, cfg.S, args.seed, cfg.frame_ms, cfg.eeg_fs_hz, cfg.fc_eeg_hz)
    report = evaluate_dataset(clf, dataset, Split.TEST)
    if args.report:
        report.write_csv(args.report)
    for k, v in report.rows():
        print(f"{k}={v}")
    return 0


def cmd_gen(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    rng = np.random.default_rng(cfg.seed)
    scenarios = read_scenarios(args.scenario) if args.scenario else []
    if args.kind == "eeg":
        sc = next((s for s in scenarios if isinstance(s, EegScenario)), None)
        if sc is None:
            n = max(1, int(args.duration_ms // 2000) - 1)
            sc = EegScenario(args.duration_ms, blink_schedule(n, rng, duration_ms=cfg.blink_duration_ms))
        rec = gen_eeg(cfg, sc).to_session(session_metadata(cfg, participant=args.participant))
    else:
        cal_sc = next((s for s in scenarios if isinstance(s, CalibrationScenario)), CalibrationScenario())
        sc = next((s for s in scenarios if isinstance(s, EmgScenario)), None)
        if sc is None:
            n = max(1, int(args.duration_ms // 2000) - 1)
            sc = EmgScenario(args.duration_ms, [(1000.0 + 2000.0 * i, 500.0, "strong" if i % 2 else "light") for i in range(n)])
        cal = run_calibration(cfg, cal_sc)
        rec = emg_session(gen_emg(cfg, sc), cal, session_metadata(cfg, participant=args.participant))
    out.parent.mkdir(parents=True, exist_ok=True)
    write_session(rec, out)
    print(f"wrote {len(rec.rows)} rows to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neuroarm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=None):
        p.add_argument("--config", help="INI file with a [sim] section")
        p.add_argument("--seed", type=int, default=seed_default)

    p = sub.add_parser("simulate", help="run the two-node simulation")
    common(p)
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--weights")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="run the pipelines over a recorded session CSV")
    common(p)
    p.add_argument("--session", required=True)
    p.add_argument("--weights")
    p.add_argument("--out")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("calibrate", help="derive EMG thresholds from a calibration scenario")
    common(p)
    p.add_argument("--scenario", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("train", help="train the blink classifier on session CSVs")
    common(p, 0)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--curves")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate weights on the test split")
    common(p, 0)
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="write a synthetic session CSV")
    common(p)
    p.add_argument("--kind", choices=("eeg", "emg"), required=True)
    p.add_argument("--scenario")
    p.add_argument("--out", required=True)
    p.add_argument("--duration-ms", type=float, default=60000.0)
    p.add_argument("--participant", default="sim-000")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        log.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
