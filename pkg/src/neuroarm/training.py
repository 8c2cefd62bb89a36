"""Offline dataset construction, augmentation, training and evaluation of the blink model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .blink import BlinkClassifier, feature_matrix, softmax
from .session import SessionRecord, read_session, session_files
from .signal import (
    FilterState,
    Label,
    SignalWindow,
    frame_samples,
    label_window,
    windows_from_frames,
)


class Split(enum.IntEnum):
    TRAIN = 0
    VAL = 1
    TEST = 2


SPLIT_FRACTIONS = (0.7, 0.2, 0.1)


@dataclass
class SessionDataset:
    windows: list[SignalWindow]
    split: np.ndarray  # Split value per window
    session: np.ndarray  # index into metadata per window
    metadata: list[dict[str, str]] = field(default_factory=list)

    @property
    def labels(self) -> np.ndarray:
        """1 for blink, 0 for rest."""
        return np.array([int(w.label is Label.BLINK) for w in self.windows], dtype=int)

    @property
    def frames(self) -> np.ndarray:
        return np.array([w.frames for w in self.windows])

    def subset(self, which: Split) -> tuple[np.ndarray, np.ndarray]:
        mask = self.split == which
        return self.frames[mask], self.labels[mask]

    def counts(self) -> dict[Split, tuple[int, int]]:
        y = self.labels
        return {s: (int(((self.split == s) & (y == 1)).sum()), int(((self.split == s) & (y == 0)).sum())) for s in Split}


def split_sizes(n: int, fractions: Sequence[float] = SPLIT_FRACTIONS) -> tuple[int, int, int]:
    n_val = int(round(n * fractions[1]))
    n_test = int(round(n * fractions[2]))
    return n - n_val - n_test, n_val, n_test


def stratified_split(labels: Sequence[int], order_key: Sequence, seed: int = 0) -> np.ndarray:
    """Seeded per-class shuffle, then 70/20/10 assignment within each class.

    Within a split, members are ordered by ``order_key`` (e.g. session and
    start index) so the assignment does not depend on input order.
    """
    labels = np.asarray(labels)
    keys = list(order_key)
    rng = np.random.default_rng(seed)
    split = np.empty(len(labels), dtype=int)
    for cls in sorted(set(labels.tolist())):
        idx = sorted(np.flatnonzero(labels == cls).tolist(), key=lambda i: keys[i])
        idx = np.array(idx, dtype=int)
        rng.shuffle(idx)
        n_train, n_val, _ = split_sizes(len(idx))
        split[idx[:n_train]] = Split.TRAIN
        split[idx[n_train : n_train + n_val]] = Split.VAL
        split[idx[n_train + n_val :]] = Split.TEST
    return split


def session_windows(
    record: SessionRecord,
    width: int = 6,
    hop: int = 1,
    frame_ms: float = 50.0,
    fs_hz: float = 128.0,
    fc_hz: float = 10.0,
) -> list[SignalWindow]:
    """Filter, frame, window and label the EEG channel of one session."""
    samples = record.samples("EEG")
    if not samples:
        return []
    frames = frame_samples(samples, frame_ms, FilterState(fc_hz, fs_hz), t0_ms=samples[0].t_ms)
    windows = windows_from_frames(frames, width, hop)
    events = record.blink_intervals(1000.0 / fs_hz)
    for w in windows:
        w.label = label_window(w, events)
    return windows


def build_dataset(
    sessions: str | Path | Iterable[str | Path | SessionRecord],
    width: int = 6,
    hop: int = 1,
    seed: int = 0,
    frame_ms: float = 50.0,
    fs_hz: float = 128.0,
    fc_hz: float = 10.0,
) -> SessionDataset:
    if isinstance(sessions, (str, Path)):
        items: list = session_files(sessions)
    else:
        items = list(sessions)
    windows: list[SignalWindow] = []
    owner: list[int] = []
    metadata = []
    for i, item in enumerate(items):
        record = item if isinstance(item, SessionRecord) else read_session(item)
        metadata.append(dict(record.metadata))
        for w in session_windows(record, width, hop, frame_ms, fs_hz, fc_hz):
            if not w.excluded:
                windows.append(w)
                owner.append(i)
    if not windows:
        raise ValueError("no usable windows")
    labels = [int(w.label is Label.BLINK) for w in windows]
    keys = [(owner[i], windows[i].start_index) for i in range(len(windows))]
    split = stratified_split(labels, keys, seed)
    return SessionDataset(windows, split, np.array(owner), metadata)


def augment(
    window: SignalWindow,
    seed: int | np.random.Generator,
    sigma: float = 0.05,
    scale_range: tuple[float, float] = (0.9, 1.1),
    max_shift: int = 1,
) -> SignalWindow:
    """Noise injection, amplitude scaling and a circular shift of up to ``max_shift`` frames."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    scale = rng.uniform(*scale_range) if scale_range[0] != scale_range[1] else scale_range[0]
    shift = int(rng.integers(-max_shift, max_shift + 1)) if max_shift else 0
    frames = np.roll(window.frames * scale, shift)
    if sigma > 0:
        frames = frames + rng.normal(0.0, sigma, frames.shape)
    return SignalWindow(
        frames=frames,
        start_index=window.start_index,
        label=window.label,
        excluded=window.excluded,
        frame_ms=window.frame_ms,
        t0_ms=window.t0_ms,
    )


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 10
    hidden: int = 8
    weight_decay: float = 1e-4
    dropout: float = 0.2
    augment_copies: int = 1
    noise_sigma: float = 0.05
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    train_acc: float
    val_acc: float


def loss_and_grads(
    clf: BlinkClassifier,
    x: np.ndarray,
    y: np.ndarray,
    weight_decay: float = 0.0,
    dropout_mask: np.ndarray | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Mean cross-entropy (+ L2 on weight matrices) and its gradients.

    ``x`` is already standardised. ``y`` holds 1 for blink (output column 0).
    ``dropout_mask`` multiplies the hidden activations (inverted-dropout scaled).
    """
    n = len(x)
    target = np.column_stack([y == 1, y == 0]).astype(float)
    pre = x @ clf.w1 + clf.b1
    h = np.tanh(pre)
    hd = h * dropout_mask if dropout_mask is not None else h
    p = softmax(hd @ clf.w2 + clf.b2)
    loss = -np.sum(target * np.log(np.clip(p, 1e-300, None))) / n
    loss += 0.5 * weight_decay * (np.sum(clf.w1**2) + np.sum(clf.w2**2))
    dz = (p - target) / n
    g_w2 = hd.T @ dz + weight_decay * clf.w2
    g_b2 = dz.sum(axis=0)
    dh = dz @ clf.w2.T
    if dropout_mask is not None:
        dh = dh * dropout_mask
    dpre = dh * (1.0 - h * h)
    g_w1 = x.T @ dpre + weight_decay * clf.w1
    g_b1 = dpre.sum(axis=0)
    return float(loss), [g_w1, g_b1, g_w2, g_b2]


def _loss_acc(clf: BlinkClassifier, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    p = softmax(np.tanh(x @ clf.w1 + clf.b1) @ clf.w2 + clf.b2)
    target = np.column_stack([y == 1, y == 0]).astype(float)
    loss = -np.sum(target * np.log(np.clip(p, 1e-300, None))) / len(x)
    acc = float(np.mean((p[:, 0] >= 0.5).astype(int) == y))
    return float(loss), acc


@dataclass
class TrainResult:
    classifier: BlinkClassifier
    history: list[EpochRecord]
    best_epoch: int


def train_arrays(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig | None = None,
) -> TrainResult:
    """Adam on raw feature rows; returns the weights with the best validation loss."""
    cfg = cfg or TrainConfig()
    y_train = np.asarray(y_train, dtype=int)
    y_val = np.asarray(y_val, dtype=int)
    if len(set(y_train.tolist())) < 2:
        raise ValueError("training data must contain both classes")
    if len(x_val) == 0:
        raise ValueError("validation split is empty")
    rng = np.random.default_rng(cfg.seed)
    clf = BlinkClassifier.initialise(x_train.shape[1], cfg.hidden, seed=cfg.seed)
    clf.feat_mean = x_train.mean(axis=0)
    scale = x_train.std(axis=0)
    clf.feat_scale = np.where(scale > 1e-12, scale, 1.0)
    xs_train = clf.standardise(x_train)
    xs_val = clf.standardise(x_val)

    m = [np.zeros_like(p) for p in clf.params()]
    v = [np.zeros_like(p) for p in clf.params()]
    step = 0
    history = []
    best = (math.inf, clf.copy(), 0)
    stale = 0
    keep = 1.0 - cfg.dropout
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(xs_train))
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            mask = None
            if cfg.dropout > 0:
                mask = (rng.random((len(idx), clf.hidden)) < keep) / keep
            _, grads = loss_and_grads(clf, xs_train[idx], y_train[idx], cfg.weight_decay, mask)
            step += 1
            for param, g, mi, vi in zip(clf.params(), grads, m, v):
                mi *= cfg.beta1
                mi += (1 - cfg.beta1) * g
                vi *= cfg.beta2
                vi += (1 - cfg.beta2) * g * g
                m_hat = mi / (1 - cfg.beta1**step)
                v_hat = vi / (1 - cfg.beta2**step)
                param -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        tr_loss, tr_acc = _loss_acc(clf, xs_train, y_train)
        va_loss, va_acc = _loss_acc(clf, xs_val, y_val)
        history.append(EpochRecord(epoch, tr_loss, va_loss, tr_acc, va_acc))
        if va_loss < best[0]:
            best = (va_loss, clf.copy(), epoch)
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return TrainResult(best[1], history, best[2])


def training_arrays(
    dataset: SessionDataset, cfg: TrainConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    frames_tr, y_tr = dataset.subset(Split.TRAIN)
    frames_va, y_va = dataset.subset(Split.VAL)
    if cfg.augment_copies > 0 and len(frames_tr):
        rng = np.random.default_rng(cfg.seed + 1)
        extra = []
        for _ in range(cfg.augment_copies):
            for f in frames_tr:
                extra.append(augment(SignalWindow(f, 0), rng, sigma=cfg.noise_sigma).frames)
        frames_tr = np.concatenate([frames_tr, np.array(extra)])
        y_tr = np.concatenate([y_tr] * (cfg.augment_copies + 1))
    return feature_matrix(frames_tr), y_tr, feature_matrix(frames_va), y_va


def train(dataset: SessionDataset, cfg: TrainConfig | None = None) -> TrainResult:
    cfg = cfg or TrainConfig()
    x_tr, y_tr, x_va, y_va = training_arrays(dataset, cfg)
    if len(x_tr) == 0 or len(x_va) == 0:
        raise ValueError("train and validation splits must be non-empty")
    return train_arrays(x_tr, y_tr, x_va, y_va, cfg)


def write_curves(history: Sequence[EpochRecord], path: str | Path) -> None:
    lines = ["epoch,train_loss,val_loss,train_acc,val_acc"]
    for r in history:
        lines.append(f"{r.epoch},{r.train_loss:.8f},{r.val_loss:.8f},{r.train_acc:.6f},{r.val_acc:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int
    roc_auc: float | None = None

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def precision_defined(self) -> bool:
        return self.tp + self.fp > 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.precision_defined else 0.0

    @property
    def recall_defined(self) -> bool:
        return self.tp + self.fn > 0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.recall_defined else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def rows(self) -> list[tuple[str, str]]:
        auc = "" if self.roc_auc is None else f"{self.roc_auc:.6f}"
        return [
            ("accuracy", f"{self.accuracy:.6f}"),
            ("precision", f"{self.precision:.6f}"),
            ("recall", f"{self.recall:.6f}"),
            ("f1", f"{self.f1:.6f}"),
            ("roc_auc", auc),
            ("precision_defined", str(self.precision_defined).lower()),
            ("tp", str(self.tp)),
            ("fp", str(self.fp)),
            ("fn", str(self.fn)),
            ("tn", str(self.tn)),
        ]

    def write_csv(self, path: str | Path) -> None:
        text = "metric,value\n" + "".join(f"{k},{v}\n" for k, v in self.rows())
        Path(path).write_text(text)


def confusion(y_true: Sequence[int], y_pred: Sequence[int]) -> tuple[int, int, int, int]:
    t = np.asarray(y_true, dtype=int)
    p = np.asarray(y_pred, dtype=int)
    return (
        int(((t == 1) & (p == 1)).sum()),
        int(((t == 0) & (p == 1)).sum()),
        int(((t == 1) & (p == 0)).sum()),
        int(((t == 0) & (p == 0)).sum()),
    )


def midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(y_true: Sequence[int], scores: Sequence[float]) -> float | None:
    """Rank-sum (Mann-Whitney) AUC with midranks for ties; None for one class."""
    y = np.asarray(y_true, dtype=int)
    s = np.asarray(scores, dtype=float)
    n_pos = int((y == 1).sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    r = midranks(s)
    return float((r[y == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def evaluate_scores(y_true: Sequence[int], p_blink: Sequence[float], threshold: float = 0.5) -> EvalReport:
    if len(y_true) == 0:
        raise ValueError("empty test split")
    pred = (np.asarray(p_blink) >= threshold).astype(int)
    return EvalReport(*confusion(y_true, pred), roc_auc=roc_auc(y_true, p_blink))


def evaluate(clf: BlinkClassifier, frames: np.ndarray, y_true: Sequence[int]) -> EvalReport:
    if len(frames) == 0:
        raise ValueError("empty test split")
    p = clf.predict_proba(feature_matrix(frames))[:, 0]
    return evaluate_scores(y_true, p)


def evaluate_dataset(clf: BlinkClassifier, dataset: SessionDataset, which: Split = Split.TEST) -> EvalReport:
    frames, y = dataset.subset(which)
    return evaluate(clf, frames, y)
