"""Session CSV files: ``#``-prefixed metadata lines, then a column header and rows.

Example::

    # participant_id=sim-000
    # date_time=1970-01-01T00:00:00
    # headset_config=fs=128Hz
    # electrode_placement=forehead Fp1
    t_ms,channel,raw_value,quality,label
    0.0,EEG,0.0123,good,rest
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .signal import Label, Quality, TimedSample, intervals_from_labels

COLUMNS = ("t_ms", "channel", "raw_value", "quality", "label")
CHANNELS = ("EEG", "EMG")


class SessionFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class SessionRow:
    t_ms: float
    channel: str
    raw_value: float
    quality: Quality
    label: Label

    def sample(self) -> TimedSample:
        return TimedSample(self.t_ms, self.raw_value, self.quality)


@dataclass
class SessionRecord:
    metadata: dict[str, str] = field(default_factory=dict)
    rows: list[SessionRow] = field(default_factory=list)

    def channel(self, name: str) -> list[SessionRow]:
        return [r for r in self.rows if r.channel == name]

    def samples(self, name: str) -> list[TimedSample]:
        return [r.sample() for r in self.channel(name)]

    def blink_intervals(self, sample_ms: float | None = None) -> list[tuple[float, float]]:
        rows = self.channel("EEG")
        if not rows:
            return []
        if sample_ms is None:
            sample_ms = rows[1].t_ms - rows[0].t_ms if len(rows) > 1 else 0.0
        return intervals_from_labels([r.t_ms for r in rows], [r.label for r in rows], sample_ms)

    def sort(self) -> None:
        order = {c: i for i, c in enumerate(CHANNELS)}
        self.rows.sort(key=lambda r: (r.t_ms, order.get(r.channel, len(order))))


def format_float(x: float) -> str:
    return repr(float(x))


def dumps(record: SessionRecord) -> str:
    buf = io.StringIO()
    for key, value in record.metadata.items():
        if "\n" in key or "\n" in value or "=" in key:
            raise ValueError(f"metadata entry {key!r} cannot be written")
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in record.rows:
        writer.writerow(
            [format_float(r.t_ms), r.channel, format_float(r.raw_value), r.quality.value, r.label.value]
        )
    return buf.getvalue()


def write_session(record: SessionRecord, path: str | Path) -> None:
    Path(path).write_text(dumps(record))


def loads(text: str) -> SessionRecord:
    record = SessionRecord()
    lines = text.splitlines()
    lineno = 0
    while lineno < len(lines) and lines[lineno].startswith("#"):
        entry = lines[lineno][1:].strip()
        if entry:
            if "=" not in entry:
                raise SessionFormatError(f"metadata line without '=': {entry!r}", lineno + 1)
            key, value = entry.split("=", 1)
            record.metadata[key.strip()] = value.strip()
        lineno += 1
    if lineno >= len(lines):
        raise SessionFormatError("missing column header", lineno + 1)
    header = [h.strip() for h in lines[lineno].split(",")]
    if tuple(header) != COLUMNS:
        raise SessionFormatError(f"bad column header {header}", lineno + 1)
    last_t: dict[str, float] = {}
    for offset, parts in enumerate(csv.reader(lines[lineno + 1 :])):
        n = lineno + 2 + offset
        if not parts:
            continue
        if len(parts) != len(COLUMNS):
            raise SessionFormatError(f"expected {len(COLUMNS)} fields, got {len(parts)}", n)
        t_s, channel, value_s, quality_s, label_s = (p.strip() for p in parts)
        try:
            t_ms = float(t_s)
            value = float(value_s)
        except ValueError:
            raise SessionFormatError(f"non-numeric field in {parts}", n) from None
        if channel not in CHANNELS:
            raise SessionFormatError(f"unknown channel {channel!r}", n)
        try:
            quality = Quality(quality_s.lower())
            label = Label(label_s.lower())
        except ValueError:
            raise SessionFormatError(f"bad quality/label {quality_s!r}/{label_s!r}", n) from None
        if channel in last_t and not t_ms > last_t[channel]:
            raise SessionFormatError(f"t_ms not increasing on {channel}", n)
        last_t[channel] = t_ms
        record.rows.append(SessionRow(t_ms, channel, value, quality, label))
    return record


def read_session(path: str | Path) -> SessionRecord:
    try:
        return loads(Path(path).read_text())
    except SessionFormatError as exc:
        err = SessionFormatError(f"{path}: {exc}")
        err.line = exc.line
        raise err from None


def session_files(data: str | Path | Iterable[str | Path]) -> list[Path]:
    if isinstance(data, (str, Path)):
        p = Path(data)
        if p.is_dir():
            return sorted(p.glob("*.csv"))
        return [p]
    return [Path(d) for d in data]
