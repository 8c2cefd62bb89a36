"""Discrete-event simulation of the two-node prosthesis and offline session replay.

Time is virtual: every event is scheduled on a tick grid (``tick_ms``) and
processed in (time, insertion) order, so a run is a pure function of the
configuration, scenarios and seed.
"""

from __future__ import annotations

import functools
import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import link
from .actuation import Arm, ScheduledProfile, default_joints, write_trace
from .blink import BlinkClassifier, EegPipeline, Hand, HandCommand, WindowDecision
from .config import SimConfig, write_config
from .emg import Direction, ElbowCommand, EmgCalibration, EmgPipeline
from .generators import (
    CalibrationScenario,
    EegScenario,
    EmgScenario,
    Scenario,
    ScenarioError,
    blink_schedule,
    gen_eeg,
    gen_emg,
    run_calibration,
)
from .session import SessionRecord, read_session
from .signal import TimedSample
from .training import (
    SessionDataset,
    TrainConfig,
    build_dataset,
    stratified_split,
    train,
)


class Scheduler:
    def __init__(self, tick_ms: float = 1.0):
        self.tick_ms = tick_ms
        self.now = 0.0
        self._heap: list = []
        self._seq = 0

    def quantize(self, t_ms: float) -> float:
        return math.ceil(t_ms / self.tick_ms - 1e-9) * self.tick_ms

    def at(self, t_ms: float, fn: Callable, *args) -> None:
        t = max(self.quantize(t_ms), self.now)
        heapq.heappush(self._heap, (t, self._seq, fn, args))
        self._seq += 1

    def run(self, until_ms: float) -> None:
        while self._heap and self._heap[0][0] <= until_ms:
            t, _, fn, args = heapq.heappop(self._heap)
            self.now = t
            fn(*args)
        self.now = max(self.now, until_ms)


@dataclass
class EventLog:
    rows: list[tuple[float, str, str, str]] = field(default_factory=list)

    def add(self, t_ms: float, node: str, event: str, detail: str = "") -> None:
        self.rows.append((t_ms, node, event, detail))

    def lines(self) -> list[str]:
        return [f"{t:.3f},{node},{event},{detail}" for t, node, event, detail in self.rows]

    def to_csv(self) -> str:
        return "t_ms,node,event,detail\n" + "".join(line + "\n" for line in self.lines())

    def of(self, event: str) -> list[tuple[float, str, str, str]]:
        return [r for r in self.rows if r[2] == event]


@dataclass
class LatencyRecord:
    pathway: str  # "eeg" or "emg"
    intent_ms: float
    detect_ms: float  # data time at which the debounced decision was complete
    command_ms: float  # decision emitted by the sensing node
    delivered_ms: float | None = None  # accepted by the prosthetic node
    complete_ms: float | None = None  # last profile of the command finished
    sensor_delay_ms: float = 0.0
    transport_ms: float | None = None
    profile_ms: float | None = None

    @property
    def command_latency(self) -> float:
        return self.command_ms - self.intent_ms

    @property
    def latency(self) -> float | None:
        return None if self.complete_ms is None else self.complete_ms - self.intent_ms

    @property
    def debounce_ms(self) -> float:
        return self.detect_ms - self.intent_ms


@dataclass
class LatencyReport:
    records: list[LatencyRecord] = field(default_factory=list)

    def pathway(self, name: str) -> list[LatencyRecord]:
        return [r for r in self.records if r.pathway == name]

    def summary(self, name: str) -> dict[str, float]:
        recs = self.pathway(name)
        out = {"count": float(len(recs))}
        cmd = np.array([r.command_latency for r in recs])
        e2e = np.array([r.latency for r in recs if r.latency is not None])
        for key, arr in (("command", cmd), ("end_to_end", e2e)):
            if len(arr):
                out[f"{key}_mean_ms"] = float(arr.mean())
                out[f"{key}_p50_ms"] = float(np.percentile(arr, 50))
                out[f"{key}_p90_ms"] = float(np.percentile(arr, 90))
                out[f"{key}_max_ms"] = float(arr.max())
        return out

    def to_csv(self) -> str:
        def f(x):
            return "" if x is None else f"{x:.3f}"

        lines = ["pathway,intent_ms,detect_ms,command_ms,delivered_ms,complete_ms,command_latency_ms,latency_ms"]
        for r in self.records:
            lines.append(",".join([r.pathway, f(r.intent_ms), f(r.detect_ms), f(r.command_ms),
                                   f(r.delivered_ms), f(r.complete_ms), f(r.command_latency), f(r.latency)]))
        return "\n".join(lines) + "\n"

    def summary_csv(self) -> str:
        lines = ["pathway,metric,value"]
        for name in ("eeg", "emg"):
            for k, v in self.summary(name).items():
                lines.append(f"{name},{k},{v:.3f}")
        return "\n".join(lines) + "\n"


def _intent_for(intents: list[tuple[float, float]], used: set, t_data: float, horizon_ms: float) -> int | None:
    """Latest unused intent whose onset precedes ``t_data`` within ``horizon_ms``."""
    best = None
    for i, (onset, _) in enumerate(intents):
        if i in used or onset > t_data or t_data - onset > horizon_ms:
            continue
        best = i
    return best


class WearerNode:
    """Headset-side controller: EEG pipeline plus the stop-and-wait command sender."""

    name = "wearer"

    def __init__(self, sim: "Simulation", clf: BlinkClassifier):
        cfg = sim.config
        self.sim = sim
        self.pipeline = EegPipeline(
            clf, cfg.eeg_fs_hz, cfg.fc_eeg_hz, cfg.frame_ms, cfg.W, cfg.S, cfg.B, cfg.theta,
            cfg.refractory, cfg.eeg_debounce,
        )
        self.arq = link.ReliabilityState(retry_limit=cfg.retry_limit, ack_timeout_ms=cfg.ack_timeout_ms)
        self.queue: list[tuple[link.CommandPacket, LatencyRecord | None]] = []
        self.inflight: tuple[link.CommandPacket, LatencyRecord | None] | None = None
        self.attempt_started = 0.0

    def on_sample(self, sample: TimedSample) -> None:
        for dec in self.pipeline.push(sample):
            if dec.command is not None:
                self._command(dec)

    def _command(self, dec: WindowDecision) -> None:
        sim = self.sim
        now = sim.sched.now
        target = dec.command.target
        sim.log.add(now, self.name, "hand_command", target.value)
        rec = None
        idx = _intent_for(sim.eeg_intents, sim.eeg_used, dec.t_ms, sim.config.blink_duration_ms + 1000.0)
        if idx is not None:
            sim.eeg_used.add(idx)
            rec = LatencyRecord("eeg", sim.eeg_intents[idx][0], dec.t_ms, now, sensor_delay_ms=now - dec.t_ms)
            sim.latency.records.append(rec)
        else:
            sim.log.add(now, self.name, "unmatched_command", "eeg")
        payload = link.motion_payload(int(sim.config.hand_duration_ms), sim.config.motion_speed,
                                      1 if target is Hand.CLOSED else 0)
        self.submit(link.CommandPacket(link.MsgType.HAND_TOGGLE, payload=payload), rec)

    def submit(self, packet: link.CommandPacket, rec: LatencyRecord | None = None) -> None:
        self.queue.append((packet, rec))
        self._pump()

    def _pump(self) -> None:
        if self.inflight is not None or not self.queue:
            return
        packet, rec = self.queue.pop(0)
        packet = self.arq.begin(packet)
        self.inflight = (packet, rec)
        if rec is not None:
            self.sim.records[packet.seq] = rec
        else:
            self.sim.records.pop(packet.seq, None)
        self._transmit()

    def _transmit(self) -> None:
        sim = self.sim
        packet, _ = self.inflight
        self.attempt_started = sim.sched.now
        sim.log.add(sim.sched.now, self.name, "tx", f"{packet.msg_type.name}#{packet.seq} try{self.arq.retries + 1}")
        sim.send(link.encode(packet), sim.prosthetic.on_frame, sim.forward)
        sim.sched.at(sim.sched.now + self.arq.ack_timeout_ms, self._timeout, packet.seq, self.arq.retries)

    def _timeout(self, seq: int, retries: int) -> None:
        if self.inflight is None or self.inflight[0].seq != seq or self.arq.retries != retries:
            return
        sim = self.sim
        if self.arq.retry():
            self._transmit()
            return
        packet, rec = self.inflight
        sim.log.add(sim.sched.now, self.name, "delivery_failed", f"{packet.msg_type.name}#{seq}")
        self.inflight = None
        self._pump()

    def on_frame(self, frame: bytes) -> None:
        sim = self.sim
        try:
            packet = link.decode(frame)
        except link.PacketError:
            sim.log.add(sim.sched.now, self.name, "rx_corrupt", "")
            return
        if packet.msg_type is link.MsgType.ACK:
            if self.inflight is not None and self.arq.acknowledge(packet.seq):
                sent, rec = self.inflight
                sim.log.add(sim.sched.now, self.name, "acked", f"{sent.msg_type.name}#{sent.seq}")
                self.inflight = None
                self._pump()
        elif packet.msg_type is link.MsgType.HALT:
            sim.log.add(sim.sched.now, self.name, "halt_notice", "")

    def heartbeat(self) -> None:
        sim = self.sim
        pkt = link.CommandPacket(link.MsgType.TELEMETRY, seq=0, payload=link.telemetry_payload(link.TelemetryKind.HEARTBEAT))
        sim.send(link.encode(pkt), sim.prosthetic.on_frame, sim.forward)
        sim.sched.at(sim.sched.now + sim.config.heartbeat_ms, self.heartbeat)


class ProstheticNode:
    """Servo-side controller: command receiver, EMG pipeline, watchdog and joints."""

    name = "prosthetic"

    def __init__(self, sim: "Simulation", cal: EmgCalibration | None):
        cfg = sim.config
        self.sim = sim
        self.receiver = link.Receiver()
        self.watchdog = link.WatchdogState(cfg.watchdog_ms, 0.0)
        self.arm = Arm(default_joints(), hand_duration_ms=cfg.hand_duration_ms, elbow_duration_ms=cfg.elbow_duration_ms)
        self.emg = None
        if cal is not None:
            self.emg = EmgPipeline(cal, cfg.emg_frame_hz, cfg.fc_emg_hz, cfg.D, cfg.elbow_step_deg, cfg.emg_repeat)

    def on_frame(self, frame: bytes) -> None:
        sim = self.sim
        now = sim.sched.now
        try:
            head = link.decode(frame)
        except link.PacketError:
            sim.log.add(now, self.name, "rx_corrupt", "")
            return
        if head.msg_type is link.MsgType.TELEMETRY and head.payload[0] == link.TelemetryKind.HEARTBEAT:
            # keep-alives bypass the sequence space
            self.watchdog.feed(now)
            return
        packet, ack = self.receiver.receive(frame, now)
        if ack is not None:
            sim.send(ack, sim.wearer.on_frame, sim.backward)
        if packet is None:
            if ack is not None:
                sim.log.add(now, self.name, "duplicate", f"#{head.seq}")
            return
        if packet.msg_type is link.MsgType.TELEMETRY:
            kind, _, _ = link.telemetry_fields(packet)
            if kind is link.TelemetryKind.RESUME:
                self.watchdog.resume(now)
                sim.log.add(now, self.name, "resume", "")
            else:
                self.watchdog.feed(now)
            return
        if packet.msg_type is link.MsgType.HAND_TOGGLE:
            if packet.payload:
                duration, speed, arg = link.motion_fields(packet)
                target = Hand.CLOSED if arg else Hand.OPEN
            else:
                duration, speed = sim.config.hand_duration_ms, sim.config.motion_speed
                target = Hand.CLOSED if self.arm.angle(self.arm.fingers[0], now) < 0.5 * (self.arm.open_deg + self.arm.closed_deg) else Hand.OPEN
            self._execute(HandCommand(target), float(duration), speed, sim.records.get(packet.seq))
        elif packet.msg_type is link.MsgType.ELBOW_MOVE:
            duration, speed, arg = link.motion_fields(packet)
            self._execute(ElbowCommand(Direction(arg), sim.config.elbow_step_deg), float(duration), speed,
                          sim.records.get(packet.seq))

    def _execute(self, cmd, duration: float, speed: int, rec: LatencyRecord | None) -> list[ScheduledProfile]:
        sim = self.sim
        now = sim.sched.now
        if self.watchdog.halted:
            sim.log.add(now, self.name, "rejected_halted", type(cmd).__name__)
            return []
        self.watchdog.feed(now)
        profiles = self.arm.execute(cmd, now, duration, speed)
        end = max(p.end_ms for p in profiles)
        detail = cmd.target.value if isinstance(cmd, HandCommand) else cmd.direction.name.lower()
        sim.log.add(now, self.name, "actuate", f"{detail} until {end:.3f}")
        if rec is not None and rec.delivered_ms is None:
            rec.delivered_ms = now
            rec.transport_ms = now - rec.command_ms
            rec.complete_ms = end
            rec.profile_ms = end - now
        return profiles

    def on_emg(self, sample: TimedSample) -> None:
        if self.emg is None:
            return
        sim = self.sim
        dec = self.emg.push(sample)
        if dec is None or dec.command is None:
            return
        now = sim.sched.now
        sim.log.add(now, self.name, "elbow_command", dec.command.direction.name.lower())
        rec = None
        idx = _intent_for(sim.emg_intents, sim.emg_used, dec.t_ms, sim.emg_horizon_ms)
        if idx is not None:
            sim.emg_used.add(idx)
            rec = LatencyRecord("emg", sim.emg_intents[idx][0], dec.t_ms, now, sensor_delay_ms=now - dec.t_ms)
            sim.latency.records.append(rec)
        else:
            sim.log.add(now, self.name, "unmatched_command", "emg")
        self._execute(dec.command, sim.config.elbow_duration_ms, sim.config.motion_speed, rec)

    def tick(self) -> None:
        sim = self.sim
        now = sim.sched.now
        if link.watchdog_tick(self.watchdog, now):
            self.arm.halt(now)
            sim.log.add(now, self.name, "halt", f"silent since {self.watchdog.last_valid_ms:.3f}")
            sim.send(link.encode(link.CommandPacket(link.MsgType.HALT)), sim.wearer.on_frame, sim.backward)
        sim.sched.at(now + 1000.0 / sim.config.watchdog_tick_hz, self.tick)


@dataclass
class SimResult:
    config: SimConfig
    log: EventLog
    latency: LatencyReport
    calibration: EmgCalibration | None
    eeg_decisions: list[WindowDecision]
    profiles: list[ScheduledProfile]
    halted_at: float | None
    eeg_samples: list[TimedSample] = field(default_factory=list)
    eeg_labels: list = field(default_factory=list)
    emg_samples: list[TimedSample] = field(default_factory=list)

    def commands(self) -> list[tuple[float, str, str, str]]:
        return [r for r in self.log.rows if r[2] in ("hand_command", "elbow_command")]


class Simulation:
    def __init__(self, config: SimConfig, clf: BlinkClassifier | None = None, cal: EmgCalibration | None = None):
        self.config = config
        self.sched = Scheduler(config.tick_ms)
        self.log = EventLog()
        self.latency = LatencyReport()
        root = np.random.default_rng(config.seed)
        self.forward = link.LossyChannel(config.loss_probability, config.node_link_ms, np.random.default_rng(root.integers(2**32)))
        self.backward = link.LossyChannel(config.loss_probability, config.node_link_ms, np.random.default_rng(root.integers(2**32)))
        self.eeg_intents: list[tuple[float, float]] = []
        self.emg_intents: list[tuple[float, float]] = []
        self.eeg_used: set = set()
        self.emg_used: set = set()
        self.emg_horizon_ms = 1000.0
        self.records: dict[int, LatencyRecord] = {}
        self.wearer = WearerNode(self, clf if clf is not None else default_classifier(config))
        self.prosthetic = ProstheticNode(self, cal)

    def send(self, frame: bytes, deliver: Callable[[bytes], None], channel: link.Channel) -> None:
        for arrival, data in channel.transmit(frame, self.sched.now):
            self.sched.at(arrival, deliver, data)


def default_classifier(config: SimConfig) -> BlinkClassifier:
    return _cached_classifier(
        config.eeg_fs_hz, config.frame_ms, config.W, config.S, config.fc_eeg_hz,
        config.eeg_noise_sigma, config.blink_amplitude, config.blink_duration_ms,
        config.tau_rise_ms, config.tau_fall_ms,
    ).copy()


@functools.lru_cache(maxsize=8)
def _cached_classifier(*key) -> BlinkClassifier:
    names = ("eeg_fs_hz", "frame_ms", "W", "S", "fc_eeg_hz", "eeg_noise_sigma", "blink_amplitude",
             "blink_duration_ms", "tau_rise_ms", "tau_fall_ms")
    config = SimConfig(**dict(zip(names, key)))
    dataset = synthetic_dataset(config, n_blink=500, n_rest=500, seed=1234)
    return train(dataset, TrainConfig(seed=1234)).classifier


def synthetic_session(config: SimConfig, n_blinks: int, seed: int, spacing_ms: float = 2000.0) -> SessionRecord:
    rng = np.random.default_rng(seed)
    blinks = blink_schedule(n_blinks, rng, spacing_ms=spacing_ms, duration_ms=config.blink_duration_ms)
    scenario = EegScenario(n_blinks * spacing_ms + 1000.0 + spacing_ms, blinks)
    stream = gen_eeg(config, scenario, seed=seed + 1)
    return stream.to_session(session_metadata(config, participant=f"synthetic-{seed}"))


def synthetic_dataset(config: SimConfig, n_blink: int = 500, n_rest: int = 500, seed: int = 0) -> SessionDataset:
    """Balanced labelled windows drawn from synthetic blink sessions."""
    per_blink = max(1, int(config.blink_duration_ms // config.frame_ms))
    n_blinks = int(math.ceil(n_blink / per_blink)) + 2
    record = synthetic_session(config, n_blinks, seed)
    full = build_dataset([record], config.W, config.S, seed, config.frame_ms, config.eeg_fs_hz, config.fc_eeg_hz)
    y = full.labels
    rng = np.random.default_rng(seed + 7)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if len(pos) < n_blink or len(neg) < n_rest:
        raise ValueError("synthetic session too short for the requested window counts")
    keep = np.sort(np.concatenate([rng.choice(pos, n_blink, replace=False), rng.choice(neg, n_rest, replace=False)]))
    windows = [full.windows[i] for i in keep]
    labels = [int(y[i]) for i in keep]
    split = stratified_split(labels, [w.start_index for w in windows], seed)
    return SessionDataset(windows, split, np.zeros(len(windows), dtype=int), full.metadata)


def session_metadata(config: SimConfig, participant: str = "sim-000", cal: EmgCalibration | None = None) -> dict[str, str]:
    meta = {
        "participant_id": participant,
        "date_time": "1970-01-01T00:00:00",
        "headset_config": f"fs={config.eeg_fs_hz:g}Hz frame={config.frame_ms:g}ms",
        "electrode_placement": "forehead Fp1 (EEG); biceps (EMG)",
        "seed": str(config.seed),
    }
    if cal is not None:
        meta.update({f"calibration.{k}": v for k, v in cal.to_entries().items()})
    return meta


def check_order(scenarios: Sequence[Scenario]) -> None:
    seen_cal = False
    for sc in scenarios:
        if isinstance(sc, CalibrationScenario):
            seen_cal = True
        elif isinstance(sc, EmgScenario) and not seen_cal:
            raise ScenarioError("an EMG scenario needs a calibration scenario before it")


def run_simulation(
    config: SimConfig,
    scenarios: Sequence[Scenario],
    clf: BlinkClassifier | None = None,
    until_ms: float | None = None,
) -> SimResult:
    check_order(scenarios)
    cal = None
    eeg = [s for s in scenarios if isinstance(s, EegScenario)]
    emg = [s for s in scenarios if isinstance(s, EmgScenario)]
    for sc in scenarios:
        if isinstance(sc, CalibrationScenario):
            cal = run_calibration(config, sc)
    if len(eeg) > 1 or len(emg) > 1:
        raise ScenarioError("at most one EEG and one EMG control scenario per run")
    sim = Simulation(config, clf, cal)
    if cal is not None:
        sim.log.add(0.0, "prosthetic", "calibrated", f"T1={cal.t1:.6f} T2={cal.t2:.6f}")
    end = 0.0
    eeg_samples: list[TimedSample] = []
    eeg_labels: list = []
    emg_samples: list[TimedSample] = []
    if eeg:
        stream = gen_eeg(config, eeg[0])
        eeg_samples, eeg_labels = stream.samples, stream.labels
        sim.eeg_intents = sorted(eeg[0].blinks)
        for s in eeg_samples:
            sim.sched.at(s.t_ms + config.eeg_link_ms, sim.wearer.on_sample, s)
        end = max(end, eeg[0].duration_ms)
    if emg:
        emg_samples = gen_emg(config, emg[0])
        sim.emg_intents = sorted((a, d) for a, d, level in emg[0].contractions if level != "rest")
        sim.emg_horizon_ms = max([d for _, d in sim.emg_intents], default=0.0) + 1000.0
        for s in emg_samples:
            sim.sched.at(s.t_ms + config.emg_link_ms, sim.prosthetic.on_emg, s)
        end = max(end, emg[0].duration_ms)
    sim.sched.at(1000.0 / config.watchdog_tick_hz, sim.prosthetic.tick)
    if config.heartbeat_ms > 0:
        sim.sched.at(config.heartbeat_ms, sim.wearer.heartbeat)
    horizon = until_ms if until_ms is not None else end + 1000.0
    sim.sched.run(horizon)
    halts = sim.log.of("halt")
    return SimResult(
        config=config,
        log=sim.log,
        latency=sim.latency,
        calibration=cal,
        eeg_decisions=sim.wearer.pipeline.decisions,
        profiles=sim.prosthetic.arm.history,
        halted_at=halts[0][0] if halts else None,
        eeg_samples=eeg_samples,
        eeg_labels=eeg_labels,
        emg_samples=emg_samples,
    )


def write_outputs(result: SimResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "events.csv").write_text(result.log.to_csv())
    (out / "latency.csv").write_text(result.latency.to_csv())
    (out / "latency_summary.csv").write_text(result.latency.summary_csv())
    extra = {}
    if result.calibration is not None:
        extra["calibration"] = result.calibration.to_entries()
    write_config(out / "config.ini", result.config, extra)
    write_trace(result.profiles, default_joints(), out / "trace.csv")
    if result.eeg_samples:
        from .session import write_session
        from .generators import EegStream

        rec = EegStream(result.eeg_samples, result.eeg_labels).to_session(
            session_metadata(result.config, cal=result.calibration))
        write_session(rec, out / "session_eeg.csv")


def decision_lines(decisions: Sequence[WindowDecision]) -> list[str]:
    """Stream-time log of blink events and hand commands from an EEG pipeline."""
    lines = []
    for d in decisions:
        if d.event:
            lines.append(f"{d.t_ms:.3f},blink_event,vote={d.blink_vote}")
        if d.command is not None:
            lines.append(f"{d.t_ms:.3f},hand_command,{d.command.target.value}")
    return lines


@dataclass
class ReplayResult:
    events: list[str]
    decisions: list[WindowDecision]
    tp: int
    fp: int
    fn: int
    emg_commands: list[str] = field(default_factory=list)

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0


def match_events(
    event_times: Sequence[float], intervals: Sequence[tuple[float, float]], tolerance_ms: float
) -> tuple[int, int, int]:
    """Greedy one-to-one matching of events to labelled intervals (+/- tolerance)."""
    used = set()
    tp = 0
    for t in event_times:
        hit = None
        for i, (a, b) in enumerate(intervals):
            if i not in used and a - tolerance_ms <= t <= b + tolerance_ms:
                hit = i
                break
        if hit is None:
            continue
        used.add(hit)
        tp += 1
    return tp, len(event_times) - tp, len(intervals) - tp


def replay_session(
    path: str | Path | SessionRecord, config: SimConfig, clf: BlinkClassifier | None = None
) -> ReplayResult:
    record = path if isinstance(path, SessionRecord) else read_session(path)
    clf = clf if clf is not None else default_classifier(config)
    samples = record.samples("EEG")
    t0 = samples[0].t_ms if samples else 0.0
    pipe = EegPipeline(clf, config.eeg_fs_hz, config.fc_eeg_hz, config.frame_ms, config.W, config.S,
                       config.B, config.theta, config.refractory, config.eeg_debounce, t0_ms=t0)
    for s in samples:
        pipe.push(s)
    toggles = [d.t_ms for d in pipe.decisions if d.command is not None]
    window_ms = config.W * config.frame_ms
    tp, fp, fn = match_events(toggles, record.blink_intervals(1000.0 / config.eeg_fs_hz), window_ms)
    result = ReplayResult(decision_lines(pipe.decisions), pipe.decisions, tp, fp, fn)
    cal_entries = {k.split(".", 1)[1]: v for k, v in record.metadata.items() if k.startswith("calibration.")}
    emg_rows = record.samples("EMG")
    if cal_entries and emg_rows:
        emg = EmgPipeline(EmgCalibration.from_entries(cal_entries), config.emg_frame_hz, config.fc_emg_hz,
                          config.D, config.elbow_step_deg, config.emg_repeat)
        for d in emg.run(emg_rows):
            if d.command is not None:
                result.emg_commands.append(f"{d.t_ms:.3f},elbow_command,{d.command.direction.name.lower()}")
    return result
