"""Sample representation, quality gating, exponential smoothing and window framing.

Both biosignal pipelines share these pieces. Raw EEG arrives as timestamped
samples, is smoothed by a first-order IIR low-pass, aggregated into fixed
duration frames, and the frame stream is cut into overlapping windows.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

AMPLITUDE_LIMIT = 10.0


class Quality(enum.Enum):
    GOOD = "good"
    POOR = "poor"
    MISSING = "missing"

    @property
    def usable(self) -> bool:
        return self is Quality.GOOD


class Label(enum.Enum):
    BLINK = "blink"
    REST = "rest"
    UNLABELED = "none"


@dataclass(frozen=True)
class TimedSample:
    t_ms: float
    value: float
    quality: Quality = Quality.GOOD


def check_monotone(samples: Sequence[TimedSample]) -> None:
    for prev, cur in zip(samples, samples[1:]):
        if not cur.t_ms > prev.t_ms:
            raise ValueError(f"timestamps not strictly increasing at t={cur.t_ms}")


def saturation_flag(sample: TimedSample) -> TimedSample:
    """Downgrade a sample whose amplitude leaves the normalized range to POOR."""
    if sample.quality is Quality.GOOD and abs(sample.value) > AMPLITUDE_LIMIT:
        return TimedSample(sample.t_ms, sample.value, Quality.POOR)
    return sample


def compute_alpha(fc_hz: float, fs_hz: float) -> float:
    """Smoothing coefficient of the exponential low-pass.

    ``alpha = dt / (tau + dt)`` with ``dt = 1/fs`` and ``tau = 1/(2*pi*fc)``.
    An infinite cutoff gives the identity filter (alpha = 1).
    """
    if not (fc_hz > 0 and fs_hz > 0):
        raise ValueError(f"frequencies must be positive, got fc={fc_hz}, fs={fs_hz}")
    dt = 1.0 / fs_hz
    tau = 0.0 if math.isinf(fc_hz) else 1.0 / (2.0 * math.pi * fc_hz)
    return dt / (tau + dt)


@dataclass
class FilterState:
    fc_hz: float
    fs_hz: float
    y_prev: float | None = None
    alpha: float = field(init=False)

    def __post_init__(self) -> None:
        self.alpha = compute_alpha(self.fc_hz, self.fs_hz)

    def retune(self, fc_hz: float | None = None, fs_hz: float | None = None) -> None:
        if fc_hz is not None:
            self.fc_hz = fc_hz
        if fs_hz is not None:
            self.fs_hz = fs_hz
        self.alpha = compute_alpha(self.fc_hz, self.fs_hz)

    @classmethod
    def with_alpha(cls, alpha: float, y_prev: float | None = None) -> "FilterState":
        """Build a state around an explicit coefficient (used for hand-checked cases)."""
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
        state = cls.__new__(cls)
        state.fc_hz = math.nan
        state.fs_hz = math.nan
        state.y_prev = y_prev
        state.alpha = alpha
        return state


def filter_step(state: FilterState, x: float) -> float:
    """One step of ``y[n] = alpha*x[n] + (1-alpha)*y[n-1]``.

    The first call seeds ``y_prev`` with ``x`` so there is no startup transient.
    """
    if not math.isfinite(x):
        raise ValueError(f"non-finite filter input {x!r}")
    if state.y_prev is None:
        state.y_prev = x
        return x
    y = state.alpha * x + (1.0 - state.alpha) * state.y_prev
    state.y_prev = y
    return y


def filter_signal(values: Iterable[float], state: FilterState) -> np.ndarray:
    return np.array([filter_step(state, float(v)) for v in values])


@dataclass(frozen=True)
class Frame:
    index: int
    t_ms: float  # start of the frame's time span
    value: float
    quality: Quality


class Framer:
    """Streams filtered samples into fixed-duration frames.

    A frame covers ``[t0 + k*frame_ms, t0 + (k+1)*frame_ms)``. Its value is the
    mean of the usable samples inside; any POOR sample marks the frame POOR and
    a frame without usable samples is MISSING. A frame is released when the
    first sample at or past its end arrives.
    """

    def __init__(self, frame_ms: float, state: FilterState, t0_ms: float = 0.0):
        if frame_ms <= 0:
            raise ValueError("frame_ms must be positive")
        self.frame_ms = frame_ms
        self.state = state
        self.t0_ms = t0_ms
        self._index = 0
        self._acc: list[float] = []
        self._poor = False

    def _close(self) -> Frame:
        if self._poor:
            quality = Quality.POOR
        elif self._acc:
            quality = Quality.GOOD
        else:
            quality = Quality.MISSING
        value = float(np.mean(self._acc)) if self._acc else 0.0
        frame = Frame(self._index, self.t0_ms + self._index * self.frame_ms, value, quality)
        self._index += 1
        self._acc = []
        self._poor = False
        return frame

    def push(self, sample: TimedSample) -> list[Frame]:
        out = []
        while sample.t_ms >= self.t0_ms + (self._index + 1) * self.frame_ms:
            out.append(self._close())
        sample = saturation_flag(sample)
        if sample.quality is Quality.GOOD:
            self._acc.append(filter_step(self.state, sample.value))
        elif sample.quality is Quality.POOR:
            self._poor = True
        return out

    def flush(self) -> list[Frame]:
        if self._acc or self._poor:
            return [self._close()]
        return []


def frame_samples(
    samples: Iterable[TimedSample], frame_ms: float, state: FilterState, t0_ms: float = 0.0
) -> list[Frame]:
    framer = Framer(frame_ms, state, t0_ms)
    frames = []
    for s in samples:
        frames.extend(framer.push(s))
    frames.extend(framer.flush())
    return frames


@dataclass
class SignalWindow:
    frames: np.ndarray
    start_index: int
    label: Label = Label.UNLABELED
    excluded: bool = False
    frame_ms: float = 50.0
    t0_ms: float = 0.0

    @property
    def width(self) -> int:
        return len(self.frames)

    @property
    def central_index(self) -> int:
        return self.width // 2

    def central_span(self) -> tuple[float, float]:
        start = self.t0_ms + (self.start_index + self.central_index) * self.frame_ms
        return start, start + self.frame_ms


def window_count(n: int, width: int, hop: int) -> int:
    if n < width:
        return 0
    return (n - width) // hop + 1


def make_windows(
    values: Sequence[float],
    width: int,
    hop: int,
    qualities: Sequence[Quality] | None = None,
    frame_ms: float = 50.0,
    t0_ms: float = 0.0,
) -> list[SignalWindow]:
    """Cut ``values`` into windows ``[x[kS], ..., x[kS+W-1]]``.

    Windows touching any non-GOOD frame are returned with ``excluded=True``.
    """
    if width < 1 or hop < 1:
        raise ValueError(f"need W >= 1 and S >= 1, got W={width}, S={hop}")
    arr = np.asarray(values, dtype=float)
    n = len(arr)
    if qualities is not None and len(qualities) != n:
        raise ValueError("qualities and values differ in length")
    bad = np.zeros(n, dtype=bool)
    if qualities is not None:
        bad = np.array([q is not Quality.GOOD for q in qualities], dtype=bool)
    windows = []
    for k in range(window_count(n, width, hop)):
        start = k * hop
        windows.append(
            SignalWindow(
                frames=arr[start : start + width].copy(),
                start_index=start,
                excluded=bool(bad[start : start + width].any()),
                frame_ms=frame_ms,
                t0_ms=t0_ms,
            )
        )
    return windows


def windows_from_frames(frames: Sequence[Frame], width: int, hop: int) -> list[SignalWindow]:
    if not frames:
        return []
    frame_ms = frames[1].t_ms - frames[0].t_ms if len(frames) > 1 else 50.0
    return make_windows(
        [f.value for f in frames],
        width,
        hop,
        [f.quality for f in frames],
        frame_ms=frame_ms,
        t0_ms=frames[0].t_ms - frames[0].index * frame_ms,
    )


def label_window(window: SignalWindow, events: Iterable[tuple[float, float]]) -> Label:
    """BLINK iff the central frame's span intersects a half-open blink interval."""
    lo, hi = window.central_span()
    for start, end in events:
        if start < hi and lo < end:
            return Label.BLINK
    return Label.REST


def intervals_from_labels(
    times: Sequence[float], labels: Sequence[Label], sample_ms: float
) -> list[tuple[float, float]]:
    """Collapse runs of BLINK-labelled samples into half-open time intervals."""
    intervals = []
    start = None
    last = None
    for t, lab in zip(times, labels):
        if lab is Label.BLINK:
            if start is None:
                start = t
            last = t
        elif start is not None:
            intervals.append((start, last + sample_ms))
            start = None
    if start is not None:
        intervals.append((start, last + sample_ms))
    return intervals
