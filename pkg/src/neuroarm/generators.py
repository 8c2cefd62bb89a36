"""Scenario files and synthetic EEG / EMG signal generators.

Scenario files are INI-style sections of key=value pairs. Lists are comma
separated, and each item is colon separated::

    [calibration]
    rest_ms = 5000
    light_ms = 3000
    strong_ms = 3000

    [eeg]
    duration_ms = 10000
    blinks = 1000:300, 4000:300      # onset_ms:duration_ms
    poor = 7000:400

    [emg]
    duration_ms = 10000
    contractions = 1000:500:strong, 5000:600:light
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import SimConfig
from .emg import EmgCalibration, calibrate, smooth_envelope
from .session import SessionRecord, SessionRow
from .signal import Label, Quality, TimedSample

LEVELS = ("rest", "light", "strong")


class ScenarioError(ValueError):
    pass


@dataclass
class CalibrationScenario:
    rest_ms: float = 5000.0
    light_ms: float = 3000.0
    strong_ms: float = 3000.0


@dataclass
class EegScenario:
    duration_ms: float = 10000.0
    blinks: list[tuple[float, float]] = field(default_factory=list)
    poor: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        _check_disjoint(self.blinks, "blink")


@dataclass
class EmgScenario:
    duration_ms: float = 10000.0
    contractions: list[tuple[float, float, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        for _, _, level in self.contractions:
            if level not in LEVELS:
                raise ScenarioError(f"unknown contraction level {level!r}")
        _check_disjoint([(a, b) for a, b, _ in self.contractions], "contraction")


def _check_disjoint(intervals, what: str) -> None:
    spans = sorted(intervals)
    for (a0, d0), (a1, _) in zip(spans, spans[1:]):
        if a0 + d0 > a1:
            raise ScenarioError(f"{what} intervals overlap at {a1} ms")
    for a, d in spans:
        if d <= 0:
            raise ScenarioError(f"{what} at {a} ms has non-positive duration")


Scenario = CalibrationScenario | EegScenario | EmgScenario


def _items(raw: str, arity: int, lineno_hint: str) -> list[tuple]:
    out = []
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != arity:
            raise ScenarioError(f"{lineno_hint}: expected {arity} ':'-separated fields in {chunk!r}")
        try:
            out.append(tuple(float(p) for p in parts[:2]) + tuple(p.strip() for p in parts[2:]))
        except ValueError:
            raise ScenarioError(f"{lineno_hint}: bad number in {chunk!r}") from None
    return out


def parse_scenarios(text: str) -> list[Scenario]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(str(exc)) from None
    out: list[Scenario] = []
    for name in parser.sections():
        sec = parser[name]
        try:
            if name == "calibration":
                out.append(CalibrationScenario(
                    float(sec.get("rest_ms", 5000)), float(sec.get("light_ms", 3000)), float(sec.get("strong_ms", 3000))))
            elif name == "eeg":
                out.append(EegScenario(
                    float(sec.get("duration_ms", 10000)),
                    _items(sec.get("blinks", ""), 2, "eeg.blinks"),
                    _items(sec.get("poor", ""), 2, "eeg.poor"),
                ))
            elif name == "emg":
                out.append(EmgScenario(
                    float(sec.get("duration_ms", 10000)),
                    _items(sec.get("contractions", ""), 3, "emg.contractions"),
                ))
            else:
                raise ScenarioError(f"unknown scenario section [{name}]")
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"[{name}]: {exc}") from None
    return out


def read_scenarios(path: str | Path) -> list[Scenario]:
    return parse_scenarios(Path(path).read_text())


def blink_kernel(t_ms: np.ndarray, tau_rise: float, tau_fall: float) -> np.ndarray:
    """Double-exponential transient scaled to a unit peak; zero before onset."""
    t = np.asarray(t_ms, dtype=float)
    if tau_rise == tau_fall:
        raise ValueError("rise and fall constants must differ")
    t_peak = math.log(tau_fall / tau_rise) * tau_rise * tau_fall / (tau_fall - tau_rise)
    peak = math.exp(-t_peak / tau_fall) - math.exp(-t_peak / tau_rise)
    tp = np.clip(t, 0.0, None)
    shape = (np.exp(-tp / tau_fall) - np.exp(-tp / tau_rise)) / peak
    return np.where(t >= 0, shape, 0.0)


@dataclass
class EegStream:
    samples: list[TimedSample]
    labels: list[Label]

    def to_session(self, metadata: dict[str, str] | None = None) -> SessionRecord:
        rec = SessionRecord(dict(metadata or {}))
        rec.rows = [SessionRow(s.t_ms, "EEG", s.value, s.quality, lab) for s, lab in zip(self.samples, self.labels)]
        return rec


def gen_eeg(config: SimConfig, scenario: EegScenario, seed: int | None = None) -> EegStream:
    rng = np.random.default_rng(config.seed if seed is None else seed)
    dt = 1000.0 / config.eeg_fs_hz
    n = int(math.floor(scenario.duration_ms / dt))
    t = np.arange(n) * dt
    sigma = config.eeg_noise_sigma
    x = rng.normal(0.0, sigma, n)
    amp = config.blink_amplitude * sigma
    blink = np.zeros(n, dtype=bool)
    for onset, dur in scenario.blinks:
        x += amp * blink_kernel(t - onset, config.tau_rise_ms, config.tau_fall_ms)
        blink |= (t >= onset) & (t < onset + dur)
    poor = np.zeros(n, dtype=bool)
    for onset, dur in scenario.poor:
        poor |= (t >= onset) & (t < onset + dur)
    samples = [
        TimedSample(float(t[i]), float(x[i]), Quality.POOR if poor[i] else Quality.GOOD) for i in range(n)
    ]
    labels = [Label.BLINK if b else Label.REST for b in blink]
    return EegStream(samples, labels)


def _ramp(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(math.pi * u))


def emg_level(config: SimConfig, name: str) -> float:
    return {"rest": config.emg_rest_level, "light": config.emg_light_level, "strong": config.emg_strong_level}[name]


def gen_emg(config: SimConfig, scenario: EmgScenario, seed: int | None = None) -> list[TimedSample]:
    """Envelope frames at ``emg_frame_hz``.

    A contraction at ``onset`` ramps up over ``emg_ramp_ms`` (raised cosine),
    holds its level until ``onset + duration`` and then ramps back to rest.
    """
    rng = np.random.default_rng(config.seed + 1 if seed is None else seed)
    dt = 1000.0 / config.emg_frame_hz
    n = int(math.floor(scenario.duration_ms / dt))
    t = np.arange(n) * dt
    rest = config.emg_rest_level
    env = np.full(n, rest)
    ramp = max(config.emg_ramp_ms, 1e-9)
    for onset, dur, level in scenario.contractions:
        height = emg_level(config, level) - rest
        up = _ramp((t - onset) / ramp)
        down = 1.0 - _ramp((t - onset - dur) / ramp)
        env += height * np.minimum(up, down) * (t >= onset)
    env = np.clip(env + rng.normal(0.0, config.emg_noise_sigma, n), 0.0, None)
    return [TimedSample(float(t[i]), float(env[i])) for i in range(n)]


def emg_session(samples: list[TimedSample], cal: EmgCalibration | None = None,
                metadata: dict[str, str] | None = None) -> SessionRecord:
    meta = dict(metadata or {})
    if cal is not None:
        meta.update({f"calibration.{k}": v for k, v in cal.to_entries().items()})
    rec = SessionRecord(meta)
    rec.rows = [SessionRow(s.t_ms, "EMG", s.value, s.quality, Label.UNLABELED) for s in samples]
    return rec


def calibration_recordings(config: SimConfig, scenario: CalibrationScenario, seed: int | None = None) -> dict[str, np.ndarray]:
    """Smoothed envelope of constant rest / light / strong holds."""
    base = config.seed + 2 if seed is None else seed
    out = {}
    for i, (name, dur) in enumerate((("rest", scenario.rest_ms), ("light", scenario.light_ms), ("strong", scenario.strong_ms))):
        rng = np.random.default_rng(base + 17 * i)
        n = max(1, int(math.floor(dur * config.emg_frame_hz / 1000.0)))
        raw = np.clip(emg_level(config, name) + rng.normal(0.0, config.emg_noise_sigma, n), 0.0, None)
        out[name] = smooth_envelope(raw, config.fc_emg_hz, config.emg_frame_hz)
    return out


def run_calibration(config: SimConfig, scenario: CalibrationScenario, seed: int | None = None) -> EmgCalibration:
    rec = calibration_recordings(config, scenario, seed)
    return calibrate(rec["rest"], rec["light"], rec["strong"], config.alpha_margin, config.beta_margin)


def blink_schedule(n_blinks: int, rng: np.random.Generator, start_ms: float = 1000.0,
                   spacing_ms: float = 2000.0, jitter_ms: float = 400.0, duration_ms: float = 300.0) -> list[tuple[float, float]]:
    """Evenly spaced blinks with uniform jitter on each onset."""
    return [
        (round(start_ms + i * spacing_ms + rng.uniform(-jitter_ms, jitter_ms), 1), duration_ms)
        for i in range(n_blinks)
    ]
