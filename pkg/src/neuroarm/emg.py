"""EMG envelope normalisation, two-threshold calibration, band classification and debounce."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .signal import FilterState, Quality, TimedSample, filter_step


class CalibrationError(ValueError):
    pass


class Band(enum.Enum):
    REST = "rest"
    EXTEND = "extend"
    CONTRACT = "contract"

    @property
    def moving(self) -> bool:
        return self is not Band.REST


class Direction(enum.IntEnum):
    EXTEND = 0
    FLEX = 1


@dataclass(frozen=True)
class ElbowCommand:
    direction: Direction
    step_deg: float = 15.0


def _check_margin(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise CalibrationError(f"{name} margin must lie in (0, 1), got {value}")


@dataclass(frozen=True)
class EmgCalibration:
    e_rest: float
    e_mid: float
    e_max: float
    alpha_margin: float = 0.5
    beta_margin: float = 0.5
    raw_min: float = 0.0
    raw_max: float = 1.0

    def __post_init__(self) -> None:
        _check_margin("alpha", self.alpha_margin)
        _check_margin("beta", self.beta_margin)
        if not self.e_rest < self.e_mid:
            raise CalibrationError(f"e_rest ({self.e_rest:.4g}) must be below e_mid ({self.e_mid:.4g})")
        if not self.e_mid < self.e_max:
            raise CalibrationError(f"e_mid ({self.e_mid:.4g}) must be below e_max ({self.e_max:.4g})")
        if not self.raw_max > self.raw_min:
            raise CalibrationError("calibration range is empty (raw_max == raw_min)")

    @property
    def t1(self) -> float:
        return self.e_rest + self.alpha_margin * (self.e_mid - self.e_rest)

    @property
    def t2(self) -> float:
        return self.e_mid + self.beta_margin * (self.e_max - self.e_mid)

    def to_entries(self) -> dict[str, str]:
        return {
            "T1": repr(self.t1),
            "T2": repr(self.t2),
            "alpha_margin": repr(self.alpha_margin),
            "beta_margin": repr(self.beta_margin),
            "raw_min": repr(self.raw_min),
            "raw_max": repr(self.raw_max),
            "e_rest": repr(self.e_rest),
            "e_mid": repr(self.e_mid),
            "e_max": repr(self.e_max),
        }

    @classmethod
    def from_entries(cls, entries: dict[str, str]) -> "EmgCalibration":
        try:
            return cls(
                e_rest=float(entries["e_rest"]),
                e_mid=float(entries["e_mid"]),
                e_max=float(entries["e_max"]),
                alpha_margin=float(entries["alpha_margin"]),
                beta_margin=float(entries["beta_margin"]),
                raw_min=float(entries["raw_min"]),
                raw_max=float(entries["raw_max"]),
            )
        except KeyError as exc:
            raise CalibrationError(f"calibration entry {exc} missing") from None


def normalize_envelope(raw: float, raw_min: float, raw_max: float) -> float:
    if raw_max == raw_min:
        raise CalibrationError("calibration range is empty (raw_max == raw_min)")
    e = (raw - raw_min) / (raw_max - raw_min)
    return min(1.0, max(0.0, e))


def calibrate(
    rest: Sequence[float],
    light: Sequence[float],
    strong: Sequence[float],
    alpha: float = 0.5,
    beta: float = 0.5,
) -> EmgCalibration:
    """Thresholds from rest / light / strong recordings of the (smoothed) envelope.

    The normalisation range is the extremes over all three recordings. The
    rest level is mean + one standard deviation so T1 clears baseline noise.
    """
    for name, rec in (("rest", rest), ("light", light), ("strong", strong)):
        if len(rec) == 0:
            raise CalibrationError(f"{name} recording is empty")
    allv = np.concatenate([np.asarray(r, dtype=float) for r in (rest, light, strong)])
    raw_min, raw_max = float(allv.min()), float(allv.max())
    if raw_max == raw_min:
        raise CalibrationError("calibration range is empty (raw_max == raw_min)")

    def norm(rec):
        return np.clip((np.asarray(rec, dtype=float) - raw_min) / (raw_max - raw_min), 0.0, 1.0)

    r = norm(rest)
    e_rest = float(r.mean() + r.std())
    e_mid = float(norm(light).mean())
    e_max = float(norm(strong).mean())
    return EmgCalibration(e_rest, e_mid, e_max, alpha, beta, raw_min, raw_max)


def classify_band(e: float, cal: EmgCalibration | tuple[float, float]) -> Band:
    t1, t2 = (cal.t1, cal.t2) if isinstance(cal, EmgCalibration) else cal
    if e < t1:
        return Band.REST
    if e < t2:
        return Band.EXTEND
    return Band.CONTRACT


@dataclass
class BandState:
    persistence: int = 8
    repeat: bool = False
    current_band: Band = Band.REST
    counter: int = 0


def command_for(band: Band, step_deg: float = 15.0) -> ElbowCommand:
    return ElbowCommand(Direction.FLEX if band is Band.CONTRACT else Direction.EXTEND, step_deg)


def debounce_band(state: BandState, band: Band, step_deg: float = 15.0) -> ElbowCommand | None:
    """Emit one command once a movement band has persisted ``persistence`` frames.

    The counter saturates after emission until the band changes. With
    ``repeat`` set it restarts instead, so a held band re-fires every
    ``persistence`` frames.
    """
    if band is not state.current_band:
        state.current_band = band
        state.counter = 0
    if not band.moving:
        state.counter = 0
        return None
    if state.counter >= state.persistence:
        return None
    state.counter += 1
    if state.counter == state.persistence:
        if state.repeat:
            state.counter = 0
        return command_for(band, step_deg)
    return None


@dataclass(frozen=True)
class EmgDecision:
    t_ms: float
    envelope: float
    band: Band
    counter: int
    command: ElbowCommand | None


@dataclass
class EmgPipeline:
    """Streaming EMG path on envelope frames: smooth -> normalise -> band -> debounce."""

    cal: EmgCalibration
    frame_hz: float = 40.0
    fc_hz: float = 25.0
    persistence: int = 8
    step_deg: float = 15.0
    repeat: bool = False
    filter: FilterState = field(init=False)
    band_state: BandState = field(init=False)
    decisions: list = field(default_factory=list)

    def __post_init__(self) -> None:
        self.filter = FilterState(self.fc_hz, self.frame_hz)
        self.band_state = BandState(self.persistence, self.repeat)

    def push(self, sample: TimedSample) -> EmgDecision | None:
        if sample.quality is not Quality.GOOD or not math.isfinite(sample.value):
            # a dropped frame breaks persistence
            debounce_band(self.band_state, Band.REST)
            return None
        smooth = filter_step(self.filter, sample.value)
        e = normalize_envelope(smooth, self.cal.raw_min, self.cal.raw_max)
        band = classify_band(e, self.cal)
        cmd = debounce_band(self.band_state, band, self.step_deg)
        dec = EmgDecision(sample.t_ms, e, band, self.band_state.counter, cmd)
        self.decisions.append(dec)
        return dec

    def run(self, samples: Iterable[TimedSample]) -> list[EmgDecision]:
        return [d for d in (self.push(s) for s in samples) if d is not None]


def smooth_envelope(values: Sequence[float], fc_hz: float, frame_hz: float) -> np.ndarray:
    state = FilterState(fc_hz, frame_hz)
    return np.array([filter_step(state, float(v)) for v in values])
