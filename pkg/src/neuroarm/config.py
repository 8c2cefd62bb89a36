"""Simulation parameters and their key=value persistence."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path


@dataclass
class SimConfig:
    seed: int = 0
    # EEG path
    eeg_fs_hz: float = 128.0
    frame_ms: float = 50.0
    W: int = 6
    S: int = 1
    B: int = 8
    theta: float = 0.6
    refractory: int = 8
    fc_eeg_hz: float = 10.0
    eeg_debounce: str = "vote"
    eeg_noise_sigma: float = 0.5
    blink_amplitude: float = 5.0  # in units of eeg_noise_sigma
    blink_duration_ms: float = 300.0
    tau_rise_ms: float = 20.0
    tau_fall_ms: float = 80.0
    # EMG path
    D: int = 8
    emg_frame_hz: float = 40.0
    fc_emg_hz: float = 25.0
    emg_repeat: bool = False
    emg_rest_level: float = 0.05
    emg_light_level: float = 0.40
    emg_strong_level: float = 0.85
    emg_noise_sigma: float = 0.02
    emg_ramp_ms: float = 100.0
    alpha_margin: float = 0.5
    beta_margin: float = 0.5
    elbow_step_deg: float = 15.0
    # transport
    loss_probability: float = 0.0
    ack_timeout_ms: float = 100.0
    retry_limit: int = 2
    eeg_link_ms: float = 20.0
    emg_link_ms: float = 100.0
    node_link_ms: float = 20.0
    heartbeat_ms: float = 0.0  # 0 disables keep-alive telemetry
    # actuation and safety
    watchdog_ms: float = 2000.0
    watchdog_tick_hz: float = 100.0
    hand_duration_ms: float = 150.0
    elbow_duration_ms: float = 200.0
    motion_speed: int = 255
    tick_ms: float = 1.0

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_entries(self) -> dict[str, str]:
        return {f.name: _fmt(getattr(self, f.name)) for f in dataclasses.fields(self)}

    @classmethod
    def from_entries(cls, entries: dict[str, str]) -> "SimConfig":
        kinds = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for key, raw in entries.items():
            if key not in kinds:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = _parse(kinds[key], raw)
        return cls(**values)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(kind: str, raw: str):
    raw = raw.strip()
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"bad boolean {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def write_config(path: str | Path, config: SimConfig, extra: dict[str, dict[str, str]] | None = None) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["sim"] = config.to_entries()
    for section, entries in (extra or {}).items():
        parser[section] = entries
    with open(path, "w") as fh:
        parser.write(fh)


def read_config(path: str | Path) -> SimConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if not parser.read(path):
        raise FileNotFoundError(path)
    if "sim" not in parser:
        return SimConfig()
    return SimConfig.from_entries(dict(parser["sim"]))
