"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from neuroarm.actuation import ServoProfile, profile_position
from neuroarm.blink import predictions_to_events
from neuroarm.config import SimConfig
from neuroarm.emg import Band, BandState, debounce_band
from neuroarm.generators import CalibrationScenario, EegScenario, EmgScenario
from neuroarm.link import (
    CommandPacket,
    LossyChannel,
    MsgType,
    Outcome,
    PacketError,
    ReliabilityState,
    WatchdogState,
    decode,
    encode,
    send_reliable,
    watchdog_tick,
)
from neuroarm.signal import FilterState, compute_alpha, filter_step, make_windows
from neuroarm.sim import _cached_classifier, default_classifier, run_simulation, synthetic_dataset
from neuroarm.training import EvalReport, Split, TrainConfig, evaluate_dataset, roc_auc, train

from test_actuation import velocity_integral
from test_emg import run_length_oracle
from test_link import random_packet
from test_training import brute_auc, gradient_check


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def test_c01_filter(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_alpha = worst_step = 0.0
    for _ in range(100):
        fc = float(rng.uniform(0.1, 200))
        fs = float(rng.uniform(fc * 0.5, 5000))
        dt = 1.0 / fs
        tau = 1.0 / (2.0 * math.pi * fc)
        a = compute_alpha(fc, fs)
        worst_alpha = max(worst_alpha, abs(a - dt / (tau + dt)))
        y0, h = float(rng.normal()), float(rng.normal())
        s = FilterState(fc, fs, y_prev=y0)
        for n in range(1, 101):
            y = filter_step(s, h)
            worst_step = max(worst_step, abs(abs(y - h) - abs(h - y0) * (1 - a) ** n))
    elapsed = time.perf_counter() - t0
    ok = worst_alpha <= 1e-12 and worst_step <= 1e-9 and elapsed < 1.0
    report(1, ok, f"filter: alpha err {worst_alpha:.1e} (<=1e-12), step err {worst_step:.1e} (<=1e-9), {elapsed:.2f}s (<1s)")


def test_c02_windowing(report):
    t0 = time.perf_counter()
    cases = mismatches = 0
    for n in range(1, 65):
        x = np.arange(float(n))
        for w in range(1, n + 1):
            for s in range(1, 9):
                cases += 1
                got = make_windows(x, w, s)
                expect = [list(range(k * s, k * s + w)) for k in range((n - w) // s + 1)]
                if len(got) != len(expect) or any(
                    g.start_index != e[0] or g.frames.tolist() != [float(i) for i in e] for g, e in zip(got, expect)
                ):
                    mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 5.0
    report(2, ok, f"windowing: {cases} (N,W,S) cases, {mismatches} mismatches, {elapsed:.2f}s (<5s)")


def test_c03_debounce(report):
    rng = np.random.default_rng(3)
    B, theta = 8, 0.6
    need = math.ceil(theta * B - 1e-9)
    vote_bad = emg_bad = 0
    for _ in range(10_000):
        ys = (rng.random(int(rng.integers(1, 80))) < rng.uniform(0.1, 0.9)).astype(int).tolist()
        events = predictions_to_events(ys, B, theta)
        for t, ev in enumerate(events):
            if ev != (sum(ys[max(0, t - B + 1) : t + 1]) >= need):
                vote_bad += 1
                break
        stay = rng.uniform(0.5, 0.97)
        bands = [Band.REST]
        for _ in range(int(rng.integers(1, 120))):
            bands.append(bands[-1] if rng.random() < stay else [Band.REST, Band.EXTEND, Band.CONTRACT][rng.integers(3)])
        st_ = BandState(8)
        got = [(i, b) for i, b in enumerate(bands) if debounce_band(st_, b) is not None]
        emg_bad += got != run_length_oracle(bands, 8)
    ok = vote_bad == 0 and emg_bad == 0
    report(3, ok, f"debounce: 10^4 vote streams {vote_bad} violations; 10^4 EMG streams {emg_bad} oracle mismatches")


def test_c04_metrics(report):
    r = EvalReport(tp=14, fp=6, fn=13, tn=18)
    got = tuple(round(v, 4) for v in (r.accuracy, r.precision, r.recall, r.f1))
    rng = np.random.default_rng(4)
    auc_bad = 0
    for _ in range(200):
        n = int(rng.integers(2, 201))
        y = rng.integers(0, 2, n)
        s = rng.integers(0, 30, n) / 30.0
        a = roc_auc(y, s)
        if len(set(y.tolist())) < 2:
            auc_bad += a is not None
        else:
            auc_bad += abs(a - brute_auc(y.tolist(), s.tolist())) > 1e-12
    ok = got == (0.6275, 0.7000, 0.5185, 0.5957) and auc_bad == 0
    report(4, ok, f"metrics: acc/prec/rec/f1 = {got}; AUC vs pair counting {auc_bad} mismatches in 200 sets")


def test_c05_training(report):
    t0 = time.perf_counter()
    cfg = SimConfig()
    ds = synthetic_dataset(cfg, 500, 500, seed=5)
    res = train(ds, TrainConfig(seed=5))
    rep = evaluate_dataset(res.classifier, ds, Split.TEST)
    worst = max(gradient_check(seed) for seed in range(100))
    elapsed = time.perf_counter() - t0
    ok = rep.f1 >= 0.90 and worst <= 1e-5 and elapsed < 60.0
    report(5, ok, f"training: test F1 {rep.f1:.4f} (>=0.90), grad rel err {worst:.1e} (<=1e-5), {elapsed:.1f}s (<60s)")


def test_c06_protocol(report):
    rng = np.random.default_rng(6)
    fwd = LossyChannel(0.3, 10.0, rng)
    back = LossyChannel(0.0, 10.0, rng)
    state = ReliabilityState()
    trials = 100_000
    ok_count = sum(
        send_reliable(state, CommandPacket(MsgType.HAND_TOGGLE), fwd, ack_channel=back).status is Outcome.DELIVERED
        for _ in range(trials)
    )
    rate = ok_count / trials
    rt_bad = 0
    crc_missed = 0
    for _ in range(10_000):
        p = random_packet(rng)
        frame = encode(p)
        rt_bad += decode(frame) != p
        buf = bytearray(frame)
        buf[int(rng.integers(len(buf)))] ^= int(rng.integers(1, 256))
        try:
            decode(bytes(buf))
            crc_missed += 1
        except PacketError:
            pass
    ok = abs(rate - 0.973) <= 0.005 and rt_bad == 0 and crc_missed == 0
    report(6, ok, f"protocol: delivery {rate:.4f} (0.973+-0.005), round-trip errors {rt_bad}, undetected corruptions {crc_missed}")


def test_c07_watchdog(report, classifier):
    detail = []
    ok = True
    for hz in (10, 50, 100):
        step = 1000.0 / hz
        s = WatchdogState(2000.0, 0.0)
        t = 0.0
        while not watchdog_tick(s, t):
            t += step
        ok &= 2000.0 < t <= 2000.0 + step
        res = run_simulation(SimConfig(watchdog_tick_hz=hz), [], classifier, until_ms=4000.0)
        ok &= res.halted_at is not None and 2000.0 < res.halted_at <= 2000.0 + step
        detail.append(f"{hz}Hz->{t:.0f}/{res.halted_at:.0f}ms")
        s = WatchdogState(2000.0, 0.0)
        fired = False
        t = 0.0
        next_cmd = 1900.0
        while t <= 60_000.0:
            if next_cmd <= t:
                s.feed(next_cmd)
                next_cmd += 1900.0
            fired |= watchdog_tick(s, t)
            t += step
        ok &= not fired
        kept = run_simulation(SimConfig(watchdog_tick_hz=hz, heartbeat_ms=1900), [], classifier, until_ms=30_000.0)
        ok &= kept.halted_at is None
    report(7, ok, "watchdog: halt (pure/sim) " + ", ".join(detail) + "; 1900 ms command period never halts")


def test_c08_trapezoid(report):
    p = ServoProfile(0.0, 90.0, 150.0, 1 / 3)
    mid = profile_position(p, 75.0)
    vpk = p.peak_velocity
    rng = np.random.default_rng(8)
    worst_int = 0.0
    endpoints = True
    for _ in range(200):
        q = ServoProfile(float(rng.uniform(-90, 180)), float(rng.uniform(-90, 180)),
                         float(rng.uniform(50, 200)), float(rng.uniform(0.05, 0.5)))
        endpoints &= profile_position(q, 0.0) == q.start_deg and profile_position(q, q.duration_ms) == q.target_deg
        integral = velocity_integral(q)
        if abs(q.displacement) > 1e-9:
            worst_int = max(worst_int, abs(integral - q.displacement) / abs(q.displacement))
    ok = abs(mid - 45.0) <= 1e-9 and abs(vpk - 900.0) <= 1e-9 and worst_int <= 1e-6 and endpoints
    report(8, ok, f"trapezoid: pos(75ms)={mid:.12f}, v_peak={vpk:.12f}, integral rel err {worst_int:.1e} (<=1e-6), endpoints exact={endpoints}")


def latency_scenarios():
    blinks = [(1000.0 + 2000.0 * i, 300.0) for i in range(9)]
    contractions = [(1500.0 + 2000.0 * i, 600.0, "strong") for i in range(9)]
    return [CalibrationScenario(), EegScenario(20_000.0, blinks), EmgScenario(20_000.0, contractions)]


def test_c09_latency(report):
    cfg = SimConfig(frame_ms=50.0, emg_frame_hz=20.0, heartbeat_ms=500)
    _cached_classifier.cache_clear()
    t0 = time.perf_counter()
    res = run_simulation(cfg, latency_scenarios())
    elapsed = time.perf_counter() - t0
    eeg = res.latency.pathway("eeg")
    emg = res.latency.pathway("emg")
    eeg_cmd = [r.command_latency for r in eeg]
    emg_cmd = [r.command_latency for r in emg]
    emg_e2e = float(np.mean([r.latency for r in emg]))
    ok = (
        len(eeg) == 9 and len(emg) == 9
        and max(eeg_cmd) <= 400.0
        and min(emg_cmd) >= 400.0
        and 640.0 <= emg_e2e <= 960.0
        and elapsed < 10.0
    )
    report(9, ok, f"latency: EEG cmd mean {np.mean(eeg_cmd):.0f}/max {max(eeg_cmd):.0f} ms (<=400), "
                  f"EMG cmd min {min(emg_cmd):.0f} ms (>=400), EMG end-to-end mean {emg_e2e:.0f} ms ([640,960]), "
                  f"{elapsed:.2f}s (<10s)")


def test_c10_determinism(report):
    def once():
        _cached_classifier.cache_clear()
        cfg = SimConfig(seed=11, heartbeat_ms=500)
        clf = default_classifier(cfg)
        res = run_simulation(cfg, latency_scenarios(), clf)
        return clf.to_bytes(), res.log.to_csv(), res.latency.to_csv()

    a, b = once(), once()
    ok = a == b and len(a[1].splitlines()) > 10
    report(10, ok, f"determinism: weights identical={a[0] == b[0]}, event log identical={a[1] == b[1]} "
                   f"({len(a[1].splitlines())} lines), latency identical={a[2] == b[2]}")
