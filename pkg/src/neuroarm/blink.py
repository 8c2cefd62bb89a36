"""Real-time blink detection: window features, classifier, vote debounce, hand toggle."""

from __future__ import annotations

import enum
import math
import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .signal import (
    FilterState,
    Framer,
    Quality,
    SignalWindow,
    TimedSample,
    make_windows,
)

FEATURE_NAMES = (
    "mean",
    "std_dev",
    "rms",
    "peak_to_peak",
    "zero_crossing_rate",
    "max_abs_first_difference",
)


class ExcludedWindowError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    mean: float
    std_dev: float
    rms: float
    peak_to_peak: float
    zero_crossing_rate: float
    max_abs_first_difference: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES])


def feature_matrix(frames: np.ndarray) -> np.ndarray:
    """Features for a batch of windows, shape (n, W) -> (n, 6)."""
    x = np.atleast_2d(np.asarray(frames, dtype=float))
    width = x.shape[1]
    mean = x.mean(axis=1)
    std = x.std(axis=1)
    rms = np.sqrt((x * x).mean(axis=1))
    p2p = x.max(axis=1) - x.min(axis=1)
    if width > 1:
        crossings = (x[:, :-1] * x[:, 1:] < 0).sum(axis=1)
        zcr = crossings / (width - 1)
        mad = np.abs(np.diff(x, axis=1)).max(axis=1)
    else:
        zcr = np.zeros(len(x))
        mad = np.zeros(len(x))
    return np.column_stack([mean, std, rms, p2p, zcr, mad])


def extract_features(window: SignalWindow) -> FeatureVector:
    if window.excluded:
        raise ExcludedWindowError("excluded input")
    return FeatureVector(*(float(v) for v in feature_matrix(window.frames)[0]))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


MAGIC = b"NARMCLF\x00"
FORMAT_VERSION = 1


@dataclass
class BlinkClassifier:
    """Single-hidden-layer tanh network with a 2-way softmax (blink, rest).

    Inputs are standardised with ``feat_mean``/``feat_scale`` before the
    first layer. Output column 0 is ``p_blink``.
    """

    w1: np.ndarray  # (n_in, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, 2)
    b2: np.ndarray  # (2,)
    feat_mean: np.ndarray
    feat_scale: np.ndarray

    @classmethod
    def initialise(cls, n_in: int = 6, hidden: int = 8, seed: int = 0) -> "BlinkClassifier":
        rng = np.random.default_rng(seed)
        lim1 = math.sqrt(6.0 / (n_in + hidden))
        lim2 = math.sqrt(6.0 / (hidden + 2))
        return cls(
            w1=rng.uniform(-lim1, lim1, (n_in, hidden)),
            b1=np.zeros(hidden),
            w2=rng.uniform(-lim2, lim2, (hidden, 2)),
            b2=np.zeros(2),
            feat_mean=np.zeros(n_in),
            feat_scale=np.ones(n_in),
        )

    @classmethod
    def zeros(cls, n_in: int = 6, hidden: int = 8) -> "BlinkClassifier":
        return cls(
            np.zeros((n_in, hidden)),
            np.zeros(hidden),
            np.zeros((hidden, 2)),
            np.zeros(2),
            np.zeros(n_in),
            np.ones(n_in),
        )

    @property
    def n_in(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self) -> "BlinkClassifier":
        return BlinkClassifier(*(a.copy() for a in (
            self.w1, self.b1, self.w2, self.b2, self.feat_mean, self.feat_scale)))

    def standardise(self, features: np.ndarray) -> np.ndarray:
        return (features - self.feat_mean) / self.feat_scale

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        """Probabilities (n, 2) for raw (unstandardised) feature rows."""
        x = np.atleast_2d(np.asarray(features, dtype=float))
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite features")
        h = np.tanh(self.standardise(x) @ self.w1 + self.b1)
        return softmax(h @ self.w2 + self.b2)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "BlinkClassifier":
        return cls.from_bytes(Path(path).read_bytes())

    def to_bytes(self) -> bytes:
        head = MAGIC + struct.pack("<HIII", FORMAT_VERSION, self.n_in, self.hidden, 2)
        body = b"".join(
            np.ascontiguousarray(a, dtype="<f8").tobytes()
            for a in (self.feat_mean, self.feat_scale, self.w1, self.b1, self.w2, self.b2)
        )
        return head + body

    @classmethod
    def from_bytes(cls, blob: bytes) -> "BlinkClassifier":
        if blob[: len(MAGIC)] != MAGIC:
            raise ValueError("not a classifier weights file (bad magic)")
        off = len(MAGIC)
        version, n_in, hidden, n_out = struct.unpack_from("<HIII", blob, off)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported weights version {version}")
        if n_out != 2:
            raise ValueError(f"expected 2 outputs, got {n_out}")
        off += struct.calcsize("<HIII")
        shapes = [(n_in,), (n_in,), (n_in, hidden), (hidden,), (hidden, n_out), (n_out,)]
        need = off + 8 * sum(int(np.prod(s)) for s in shapes)
        if len(blob) != need:
            raise ValueError(f"weights file has {len(blob)} bytes, expected {need}")
        arrays = []
        for shape in shapes:
            count = int(np.prod(shape))
            arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(shape)
            arrays.append(arr.astype(float))
            off += 8 * count
        mean, scale, w1, b1, w2, b2 = arrays
        return cls(w1, b1, w2, b2, mean, scale)


def classify(clf: BlinkClassifier, f: FeatureVector | np.ndarray) -> tuple[float, float]:
    vec = f.as_array() if isinstance(f, FeatureVector) else np.asarray(f, dtype=float)
    p = clf.predict_proba(vec)[0]
    return float(p[0]), float(p[1])


def decide(p_blink: float, threshold: float = 0.5) -> int:
    return int(p_blink >= threshold)


def vote_threshold(capacity: int, theta: float) -> int:
    # the epsilon keeps 0.6*5 == 3 from rounding up to 4
    return max(1, math.ceil(theta * capacity - 1e-9))


@dataclass
class VoteBuffer:
    capacity: int = 8
    theta: float = 0.6
    mode: str = "vote"  # or "consecutive"
    history: deque = field(default_factory=deque)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("buffer capacity must be >= 1")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")
        if self.mode not in ("vote", "consecutive"):
            raise ValueError(f"unknown debounce mode {self.mode!r}")
        self.history = deque(self.history, maxlen=self.capacity)

    @property
    def threshold(self) -> int:
        return vote_threshold(self.capacity, self.theta)

    @property
    def blink_vote(self) -> int:
        return sum(self.history)

    def clear(self) -> None:
        self.history.clear()

    def trailing_ones(self) -> int:
        n = 0
        for y in reversed(self.history):
            if not y:
                break
            n += 1
        return n


def vote(buffer: VoteBuffer, y_hat: int) -> bool:
    """Push one prediction; True when the buffer accepts a blink event."""
    buffer.history.append(1 if y_hat else 0)
    if buffer.mode == "consecutive":
        return buffer.trailing_ones() >= buffer.threshold
    return buffer.blink_vote >= buffer.threshold


class Hand(enum.Enum):
    OPEN = "open"
    CLOSED = "closed"

    def flipped(self) -> "Hand":
        return Hand.CLOSED if self is Hand.OPEN else Hand.OPEN


@dataclass
class HandState:
    state: Hand = Hand.OPEN
    refractory_remaining: int = 0
    refractory: int = 8


@dataclass(frozen=True)
class HandCommand:
    target: Hand


def toggle_hand(hand: HandState, event: bool) -> HandCommand | None:
    """Flip the hand on an accepted blink unless still refractory.

    Call once per window; the refractory count drops by one on every call
    that does not toggle.
    """
    if event and hand.refractory_remaining == 0:
        hand.state = hand.state.flipped()
        hand.refractory_remaining = hand.refractory
        return HandCommand(hand.state)
    if hand.refractory_remaining > 0:
        hand.refractory_remaining -= 1
    return None


def suppress_on_poor_signal(quality: Quality, buffer: VoteBuffer) -> bool:
    """Return True when the window must be skipped; clears stale votes."""
    if quality is Quality.GOOD:
        return False
    buffer.clear()
    return True


@dataclass(frozen=True)
class WindowDecision:
    t_ms: float  # end of the window's last frame
    start_index: int
    skipped: bool
    p_blink: float
    y_hat: int
    blink_vote: int
    event: bool
    command: HandCommand | None


class EegPipeline:
    """Streaming EEG path: filter -> frames -> windows -> classifier -> votes -> toggle."""

    def __init__(
        self,
        clf: BlinkClassifier,
        fs_hz: float = 128.0,
        fc_hz: float = 10.0,
        frame_ms: float = 50.0,
        width: int = 6,
        hop: int = 1,
        capacity: int = 8,
        theta: float = 0.6,
        refractory: int = 8,
        mode: str = "vote",
        t0_ms: float = 0.0,
    ):
        self.clf = clf
        self.framer = Framer(frame_ms, FilterState(fc_hz, fs_hz), t0_ms)
        self.frame_ms = frame_ms
        self.width = width
        self.hop = hop
        self.buffer = VoteBuffer(capacity, theta, mode)
        self.hand = HandState(refractory=refractory)
        self._values: deque = deque(maxlen=width)
        self._quals: deque = deque(maxlen=width)
        self._frames_seen = 0
        self.decisions: list[WindowDecision] = []
        self.classified_windows = 0

    def push(self, sample: TimedSample) -> list[WindowDecision]:
        out = []
        for frame in self.framer.push(sample):
            self._values.append(frame.value)
            self._quals.append(frame.quality)
            self._frames_seen += 1
            if self._frames_seen < self.width:
                continue
            start = self._frames_seen - self.width
            if start % self.hop:
                continue
            out.append(self._process(frame.t_ms + self.frame_ms, start))
        return out

    def _process(self, t_end: float, start: int) -> WindowDecision:
        window = make_windows(list(self._values), self.width, self.width, list(self._quals))[0]
        if suppress_on_poor_signal(Quality.POOR if window.excluded else Quality.GOOD, self.buffer):
            command = toggle_hand(self.hand, False)
            dec = WindowDecision(t_end, start, True, math.nan, 0, 0, False, command)
        else:
            self.classified_windows += 1
            p_blink, _ = classify(self.clf, extract_features(window))
            y_hat = decide(p_blink)
            event = vote(self.buffer, y_hat)
            command = toggle_hand(self.hand, event)
            dec = WindowDecision(t_end, start, False, p_blink, y_hat, self.buffer.blink_vote, event, command)
        self.decisions.append(dec)
        return dec

    def run(self, samples: Iterable[TimedSample]) -> Iterator[WindowDecision]:
        for s in samples:
            yield from self.push(s)


def predictions_to_events(
    y_hats: Sequence[int], capacity: int = 8, theta: float = 0.6, mode: str = "vote"
) -> list[bool]:
    buf = VoteBuffer(capacity, theta, mode)
    return [vote(buf, y) for y in y_hats]
