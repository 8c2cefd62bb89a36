"""Servo motion: trapezoidal profiles, PWM mapping, and per-joint command execution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .blink import Hand, HandCommand
from .emg import Direction, ElbowCommand

MIN_DURATION_MS = 50.0
MAX_DURATION_MS = 200.0


@dataclass(frozen=True)
class ServoProfile:
    start_deg: float
    target_deg: float
    duration_ms: float = 150.0
    accel_fraction: float = 1.0 / 3.0

    def __post_init__(self) -> None:
        if not 0.0 < self.accel_fraction <= 0.5:
            raise ValueError("accel_fraction must lie in (0, 0.5]")
        if self.duration_ms <= 0:
            raise ValueError("duration must be positive")

    @property
    def displacement(self) -> float:
        return self.target_deg - self.start_deg

    @property
    def peak_velocity(self) -> float:
        """Cruise velocity in deg/s."""
        return self.displacement / (self.duration_ms / 1000.0 * (1.0 - self.accel_fraction))


def profile_position(p: ServoProfile, t_ms: float) -> float:
    """Angle at ``t_ms`` along a symmetric accel / cruise / decel trapezoid."""
    if t_ms <= 0:
        return p.start_deg
    if t_ms >= p.duration_ms:
        return p.target_deg
    T = p.duration_ms / 1000.0
    t = t_ms / 1000.0
    ta = p.accel_fraction * T
    v = p.peak_velocity
    a = v / ta
    if t < ta:
        s = 0.5 * a * t * t
    elif t <= T - ta:
        s = 0.5 * a * ta * ta + v * (t - ta)
    else:
        r = T - t
        s = p.displacement - 0.5 * a * r * r
    return p.start_deg + s


def profile_velocity(p: ServoProfile, t_ms: float) -> float:
    if t_ms <= 0 or t_ms >= p.duration_ms:
        return 0.0
    T = p.duration_ms / 1000.0
    t = t_ms / 1000.0
    ta = p.accel_fraction * T
    v = p.peak_velocity
    if t < ta:
        return v * t / ta
    if t <= T - ta:
        return v
    return v * (T - t) / ta


@dataclass(frozen=True)
class JointConfig:
    name: str = "joint"
    min_deg: float = 0.0
    max_deg: float = 180.0
    pulse_min_us: float = 1000.0
    pulse_max_us: float = 2000.0
    reversed: bool = False

    def __post_init__(self) -> None:
        if not self.min_deg < self.max_deg:
            raise ValueError("min_deg must be below max_deg")
        if not self.pulse_min_us < self.pulse_max_us:
            raise ValueError("pulse widths must increase with angle")

    def clamp(self, angle: float) -> float:
        return min(self.max_deg, max(self.min_deg, angle))


def angle_to_pulse(cfg: JointConfig, angle: float) -> tuple[int, bool]:
    """Integer pulse width in microseconds and whether the angle was clamped."""
    clamped = cfg.clamp(angle)
    frac = (clamped - cfg.min_deg) / (cfg.max_deg - cfg.min_deg)
    us = cfg.pulse_min_us + frac * (cfg.pulse_max_us - cfg.pulse_min_us)
    return int(round(us)), clamped != angle


def speed_duration(duration_ms: float, speed: int) -> float:
    """Speed 255 keeps the commanded duration; lower speeds stretch it (clamped)."""
    speed = max(1, min(255, int(speed)))
    return min(MAX_DURATION_MS, max(MIN_DURATION_MS, duration_ms * 255.0 / speed))


class HaltedError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScheduledProfile:
    joint: str
    start_ms: float
    profile: ServoProfile

    @property
    def end_ms(self) -> float:
        return self.start_ms + self.profile.duration_ms


def default_joints() -> dict[str, JointConfig]:
    joints = {f"finger{i}": JointConfig(f"finger{i}") for i in range(4)}
    joints["elbow_a"] = JointConfig("elbow_a", 0.0, 150.0)
    joints["elbow_b"] = JointConfig("elbow_b", 0.0, 150.0, reversed=True)
    return joints


@dataclass
class Arm:
    """Joint set of the prosthesis with the profiles scheduled on each joint."""

    joints: dict[str, JointConfig] = field(default_factory=default_joints)
    open_deg: float = 10.0
    closed_deg: float = 160.0
    hand_duration_ms: float = 150.0
    elbow_duration_ms: float = 200.0
    accel_fraction: float = 1.0 / 3.0
    elbow_deg: float = 75.0  # logical elbow angle, elbow_a frame
    active: dict[str, ScheduledProfile] = field(default_factory=dict)
    history: list[ScheduledProfile] = field(default_factory=list)

    def __post_init__(self) -> None:
        for name, cfg in self.joints.items():
            if name.startswith("finger"):
                self.active.setdefault(name, ScheduledProfile(name, 0.0, ServoProfile(self.open_deg, self.open_deg, self.hand_duration_ms)))
        self._set_elbow_targets(0.0, self.elbow_deg, self.elbow_duration_ms, record=False)

    @property
    def fingers(self) -> list[str]:
        return sorted(n for n in self.joints if n.startswith("finger"))

    @property
    def elbows(self) -> list[str]:
        return sorted(n for n in self.joints if n.startswith("elbow"))

    def angle(self, joint: str, t_ms: float) -> float:
        sp = self.active.get(joint)
        if sp is None:
            return self.joints[joint].min_deg
        return profile_position(sp.profile, t_ms - sp.start_ms)

    def _schedule(self, joint: str, target: float, t_ms: float, duration: float, record: bool = True) -> ScheduledProfile:
        cfg = self.joints[joint]
        start = self.angle(joint, t_ms) if joint in self.active else cfg.clamp(target)
        sp = ScheduledProfile(joint, t_ms, ServoProfile(start, cfg.clamp(target), duration, self.accel_fraction))
        self.active[joint] = sp
        if record:
            self.history.append(sp)
        return sp

    def _mirror(self, joint: str, logical: float) -> float:
        cfg = self.joints[joint]
        return cfg.max_deg + cfg.min_deg - logical if cfg.reversed else logical

    def _set_elbow_targets(self, t_ms, logical, duration, record=True):
        return [self._schedule(j, self._mirror(j, logical), t_ms, duration, record) for j in self.elbows]

    def execute(
        self,
        cmd: HandCommand | ElbowCommand,
        t_ms: float,
        duration_ms: float | None = None,
        speed: int = 255,
    ) -> list[ScheduledProfile]:
        if isinstance(cmd, HandCommand):
            base = self.hand_duration_ms if duration_ms is None else duration_ms
            duration = speed_duration(base, speed)
            target = self.closed_deg if cmd.target is Hand.CLOSED else self.open_deg
            return [self._schedule(j, target, t_ms, duration) for j in self.fingers]
        base = self.elbow_duration_ms if duration_ms is None else duration_ms
        duration = speed_duration(base, speed)
        ref = self.joints[self.elbows[0]]
        sign = 1.0 if cmd.direction is Direction.FLEX else -1.0
        self.elbow_deg = ref.clamp(self.elbow_deg + sign * cmd.step_deg)
        return self._set_elbow_targets(t_ms, self.elbow_deg, duration)

    def halt(self, t_ms: float) -> None:
        """Freeze every joint at its current angle."""
        for joint in list(self.active):
            here = self.angle(joint, t_ms)
            self.active[joint] = ScheduledProfile(joint, t_ms, ServoProfile(here, here, MIN_DURATION_MS))


def execute_command(
    cmd: HandCommand | ElbowCommand,
    arm: Arm,
    t_ms: float = 0.0,
    halted: bool = False,
    duration_ms: float | None = None,
    speed: int = 255,
) -> list[ScheduledProfile]:
    if halted:
        raise HaltedError("node is halted; command rejected")
    return arm.execute(cmd, t_ms, duration_ms, speed)


def trace_rows(
    profiles: Sequence[ScheduledProfile], joints: dict[str, JointConfig], step_ms: float = 5.0
) -> list[tuple[float, str, float, int]]:
    rows = []
    for sp in profiles:
        n = max(1, int(math.ceil(sp.profile.duration_ms / step_ms)))
        for i in range(n + 1):
            dt = min(i * step_ms, sp.profile.duration_ms)
            angle = profile_position(sp.profile, dt)
            pulse, _ = angle_to_pulse(joints[sp.joint], angle)
            rows.append((sp.start_ms + dt, sp.joint, angle, pulse))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def write_trace(
    profiles: Iterable[ScheduledProfile], joints: dict[str, JointConfig], path: str | Path, step_ms: float = 5.0
) -> None:
    lines = ["t_ms,joint,angle_deg,pulse_us"]
    for t, joint, angle, pulse in trace_rows(list(profiles), joints, step_ms):
        lines.append(f"{t:.3f},{joint},{angle:.6f},{pulse}")
    Path(path).write_text("\n".join(lines) + "\n")
