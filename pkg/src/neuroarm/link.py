"""Command link between the wearer-side and prosthetic-side nodes.

Frame layout (all multi-byte fields little-endian)::

    0xAA | version | msg_type | seq | payload_len | payload ... | crc16 (2 bytes)

The CRC is CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF) over every byte
before it. Motion payloads are ``duration_ms (u16) | speed (u8) | arg (u8)``
where ``arg`` is the target hand state or the elbow direction.
"""

from __future__ import annotations

import binascii
import enum
import struct
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np

SYNC = 0xAA
VERSION = 1
HEADER_LEN = 5
OVERHEAD = HEADER_LEN + 2
MAX_PAYLOAD = 255


class PacketError(ValueError):
    pass


class ChecksumError(PacketError):
    pass


class MsgType(enum.IntEnum):
    HAND_TOGGLE = 1
    ELBOW_MOVE = 2
    TELEMETRY = 3
    ACK = 4
    HALT = 5


PAYLOAD_LENGTHS = {
    MsgType.HAND_TOGGLE: {0, 4},
    MsgType.ELBOW_MOVE: {4},
    MsgType.TELEMETRY: {3},
    MsgType.ACK: {0},
    MsgType.HALT: {0},
}


class TelemetryKind(enum.IntEnum):
    STATUS = 0
    RESUME = 1
    HEARTBEAT = 2


def crc16(data: bytes) -> int:
    return binascii.crc_hqx(data, 0xFFFF)


@dataclass(frozen=True)
class CommandPacket:
    msg_type: MsgType
    seq: int = 0
    payload: bytes = b""
    version: int = VERSION

    @property
    def is_motion(self) -> bool:
        return self.msg_type in (MsgType.HAND_TOGGLE, MsgType.ELBOW_MOVE) and len(self.payload) == 4


def encode(packet: CommandPacket) -> bytes:
    if len(packet.payload) > MAX_PAYLOAD:
        raise PacketError(f"payload of {len(packet.payload)} bytes exceeds {MAX_PAYLOAD}")
    allowed = PAYLOAD_LENGTHS[MsgType(packet.msg_type)]
    if len(packet.payload) not in allowed:
        raise PacketError(f"{MsgType(packet.msg_type).name} payload must be {sorted(allowed)} bytes")
    if not 0 <= packet.seq <= 255 or not 0 <= packet.version <= 255:
        raise PacketError("seq and version are single bytes")
    body = bytes([SYNC, packet.version, int(packet.msg_type), packet.seq, len(packet.payload)]) + packet.payload
    return body + struct.pack("<H", crc16(body))


def decode(frame: bytes) -> CommandPacket:
    if len(frame) < OVERHEAD:
        raise PacketError(f"frame too short ({len(frame)} bytes)")
    if frame[0] != SYNC:
        raise PacketError(f"bad sync byte 0x{frame[0]:02X}")
    n = frame[4]
    if len(frame) != OVERHEAD + n:
        raise PacketError(f"length mismatch: header says {n}, frame has {len(frame) - OVERHEAD}")
    (crc,) = struct.unpack_from("<H", frame, HEADER_LEN + n)
    if crc != crc16(frame[: HEADER_LEN + n]):
        raise ChecksumError("checksum mismatch")
    try:
        msg_type = MsgType(frame[2])
    except ValueError:
        raise PacketError(f"unknown message type {frame[2]}") from None
    if n not in PAYLOAD_LENGTHS[msg_type]:
        raise PacketError(f"{msg_type.name} payload cannot be {n} bytes")
    return CommandPacket(msg_type, frame[3], bytes(frame[HEADER_LEN : HEADER_LEN + n]), frame[1])


def motion_payload(duration_ms: int, speed: int, arg: int) -> bytes:
    if not 0 <= duration_ms <= 0xFFFF or not 0 <= speed <= 255 or not 0 <= arg <= 255:
        raise PacketError("motion field out of range")
    return struct.pack("<HBB", duration_ms, speed, arg)


def motion_fields(packet: CommandPacket) -> tuple[int, int, int]:
    if len(packet.payload) != 4:
        raise PacketError("packet carries no motion payload")
    return struct.unpack("<HBB", packet.payload)


def telemetry_payload(kind: TelemetryKind, battery_pct: int = 100, link_ok: bool = True) -> bytes:
    return bytes([int(kind), max(0, min(100, battery_pct)), int(link_ok)])


def telemetry_fields(packet: CommandPacket) -> tuple[TelemetryKind, int, bool]:
    kind, battery, link = packet.payload
    return TelemetryKind(kind), battery, bool(link)


class Channel(Protocol):
    def transmit(self, frame: bytes, now_ms: float) -> list[tuple[float, bytes]]:
        """Arrivals (time, bytes) caused by sending ``frame`` at ``now_ms``."""
        ...


@dataclass
class LossyChannel:
    """Memoryless channel: drops each frame with ``loss_probability``."""

    loss_probability: float = 0.0
    latency_ms: float = 10.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    corrupt_probability: float = 0.0

    def transmit(self, frame: bytes, now_ms: float) -> list[tuple[float, bytes]]:
        if self.loss_probability and self.rng.random() < self.loss_probability:
            return []
        if self.corrupt_probability and self.rng.random() < self.corrupt_probability:
            buf = bytearray(frame)
            pos = int(self.rng.integers(len(buf)))
            buf[pos] ^= 1 << int(self.rng.integers(8))
            frame = bytes(buf)
        return [(now_ms + self.latency_ms, frame)]


@dataclass
class ScriptedChannel:
    """Drops the transmissions whose 0-based ordinal is in ``drop``."""

    drop: set = field(default_factory=set)
    drop_all: bool = False
    latency_ms: float = 10.0
    sent: int = 0

    def transmit(self, frame: bytes, now_ms: float) -> list[tuple[float, bytes]]:
        n = self.sent
        self.sent += 1
        if self.drop_all or n in self.drop:
            return []
        return [(now_ms + self.latency_ms, frame)]


class Outcome(enum.Enum):
    DELIVERED = "delivered"
    FAILED = "failed"


@dataclass(frozen=True)
class DeliveryOutcome:
    status: Outcome
    attempts: int
    seq: int
    finished_ms: float
    first_arrival_ms: float | None = None


@dataclass
class ReliabilityState:
    """Stop-and-wait sender: one packet in flight, bounded retries."""

    next_seq: int = 0
    retry_limit: int = 2
    ack_timeout_ms: float = 100.0
    pending: CommandPacket | None = None
    retries: int = 0

    def begin(self, packet: CommandPacket) -> CommandPacket:
        if self.pending is not None:
            raise RuntimeError("a packet is already awaiting acknowledgement")
        packet = replace(packet, seq=self.next_seq)
        self.next_seq = (self.next_seq + 1) % 256
        self.pending = packet
        self.retries = 0
        return packet

    def acknowledge(self, seq: int) -> bool:
        if self.pending is not None and seq == self.pending.seq:
            self.pending = None
            return True
        return False

    def retry(self) -> bool:
        """Account for a timeout; False when the retry budget is spent."""
        if self.pending is None:
            return False
        if self.retries >= self.retry_limit:
            self.pending = None
            return False
        self.retries += 1
        return True


def is_newer(seq: int, last: int | None) -> bool:
    if last is None:
        return True
    return 0 < (seq - last) % 256 < 128


@dataclass
class Receiver:
    """Application-side endpoint: validates, de-duplicates and acknowledges."""

    last_seq: int | None = None
    delivered: list = field(default_factory=list)
    rejected: int = 0

    def receive(self, frame: bytes, now_ms: float = 0.0) -> tuple[CommandPacket | None, bytes | None]:
        """Returns (newly delivered packet or None, ack frame or None)."""
        try:
            packet = decode(frame)
        except PacketError:
            self.rejected += 1
            return None, None
        if packet.msg_type is MsgType.ACK:
            return None, None
        ack = encode(CommandPacket(MsgType.ACK, packet.seq))
        if not is_newer(packet.seq, self.last_seq):
            return None, ack
        self.last_seq = packet.seq
        self.delivered.append((now_ms, packet))
        return packet, ack


def send_reliable(
    state: ReliabilityState,
    packet: CommandPacket,
    channel: Channel,
    receiver: Receiver | None = None,
    ack_channel: Channel | None = None,
    now_ms: float = 0.0,
) -> DeliveryOutcome:
    """Send one packet, retransmitting on ack timeout up to ``retry_limit`` times."""
    receiver = receiver if receiver is not None else Receiver()
    ack_channel = ack_channel if ack_channel is not None else channel
    packet = state.begin(packet)
    frame = encode(packet)
    attempts = 0
    first_arrival = None
    t = now_ms
    while True:
        attempts += 1
        deadline = t + state.ack_timeout_ms
        acked_at = None
        for arrival, data in sorted(channel.transmit(frame, t)):
            delivered, ack = receiver.receive(data, arrival)
            if delivered is not None and first_arrival is None:
                first_arrival = arrival
            if ack is None:
                continue
            for ack_time, ack_data in ack_channel.transmit(ack, arrival):
                try:
                    got = decode(ack_data)
                except PacketError:
                    continue
                if ack_time <= deadline and got.msg_type is MsgType.ACK:
                    if acked_at is None or ack_time < acked_at:
                        acked_at = ack_time
        if acked_at is not None and state.acknowledge(packet.seq):
            return DeliveryOutcome(Outcome.DELIVERED, attempts, packet.seq, acked_at, first_arrival)
        if not state.retry():
            return DeliveryOutcome(Outcome.FAILED, attempts, packet.seq, deadline, first_arrival)
        t = deadline


@dataclass
class WatchdogState:
    timeout_ms: float = 2000.0
    last_valid_ms: float = 0.0
    halted: bool = False

    def feed(self, now_ms: float) -> None:
        self.last_valid_ms = max(self.last_valid_ms, now_ms)

    def resume(self, now_ms: float) -> None:
        self.halted = False
        self.last_valid_ms = now_ms


def watchdog_tick(state: WatchdogState, now_ms: float) -> bool:
    """True exactly once, on the first tick past the timeout; halt then latches."""
    if state.halted:
        return False
    if now_ms - state.last_valid_ms > state.timeout_ms:
        state.halted = True
        return True
    return False
