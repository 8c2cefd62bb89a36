import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neuroarm.link import (
    ChecksumError,
    CommandPacket,
    LossyChannel,
    MsgType,
    Outcome,
    PacketError,
    Receiver,
    ReliabilityState,
    ScriptedChannel,
    TelemetryKind,
    WatchdogState,
    crc16,
    decode,
    encode,
    is_newer,
    motion_fields,
    motion_payload,
    send_reliable,
    telemetry_fields,
    telemetry_payload,
    watchdog_tick,
)


def crc_reference(data: bytes) -> int:
    """Bitwise CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout."""
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
    return crc


def random_packet(rng):
    kind = MsgType(int(rng.integers(1, 6)))
    seq = int(rng.integers(256))
    if kind is MsgType.ELBOW_MOVE or (kind is MsgType.HAND_TOGGLE and rng.random() < 0.5):
        payload = motion_payload(int(rng.integers(65536)), int(rng.integers(256)), int(rng.integers(256)))
    elif kind is MsgType.TELEMETRY:
        payload = telemetry_payload(TelemetryKind(int(rng.integers(3))), int(rng.integers(101)), bool(rng.integers(2)))
    else:
        payload = b""
    return CommandPacket(kind, seq, payload, int(rng.integers(256)))


class TestCrc:
    def test_check_value(self):
        assert crc16(b"123456789") == 0x29B1 == crc_reference(b"123456789")

    @given(st.binary(max_size=64))
    def test_matches_reference(self, data):
        assert crc16(data) == crc_reference(data)


class TestFraming:
    def test_hand_toggle_frame(self):
        frame = encode(CommandPacket(MsgType.HAND_TOGGLE, 0))
        body = bytes([0xAA, 0x01, 0x01, 0x00, 0x00])
        c = crc_reference(body)
        assert frame == body + bytes([c & 0xFF, c >> 8])
        assert len(frame) == 7

    def test_motion_frame_layout(self):
        frame = encode(CommandPacket(MsgType.ELBOW_MOVE, 7, motion_payload(200, 255, 1)))
        assert frame[:9] == bytes([0xAA, 1, 2, 7, 4, 0xC8, 0x00, 0xFF, 0x01])
        assert len(frame) == 11

    def test_round_trip_random(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            p = random_packet(rng)
            assert decode(encode(p)) == p

    def test_flip_byte_three(self):
        frame = bytearray(encode(CommandPacket(MsgType.HAND_TOGGLE, 5)))
        frame[3] ^= 0xFF
        with pytest.raises(ChecksumError):
            decode(bytes(frame))

    def test_single_byte_corruption_fuzz(self):
        rng = np.random.default_rng(1)
        for _ in range(10_000):
            frame = bytearray(encode(random_packet(rng)))
            pos = int(rng.integers(len(frame)))
            frame[pos] ^= int(rng.integers(1, 256))
            with pytest.raises(PacketError):
                decode(bytes(frame))

    def test_errors(self):
        with pytest.raises(PacketError, match="exceeds"):
            encode(CommandPacket(MsgType.HAND_TOGGLE, 0, b"x" * 300))
        with pytest.raises(PacketError):
            encode(CommandPacket(MsgType.ACK, 0, b"xx"))
        with pytest.raises(PacketError, match="short"):
            decode(b"\xaa\x01")

    def test_fields(self):
        p = CommandPacket(MsgType.HAND_TOGGLE, 1, motion_payload(150, 200, 1))
        assert motion_fields(p) == (150, 200, 1)
        t = CommandPacket(MsgType.TELEMETRY, 2, telemetry_payload(TelemetryKind.RESUME, 80, False))
        assert telemetry_fields(t) == (TelemetryKind.RESUME, 80, False)


class TestReliability:
    def send(self, channel, ack_channel=None):
        return send_reliable(ReliabilityState(), CommandPacket(MsgType.HAND_TOGGLE), channel, ack_channel=ack_channel)

    def test_lossless(self):
        out = self.send(ScriptedChannel())
        assert out.status is Outcome.DELIVERED and out.attempts == 1

    def test_first_two_dropped(self):
        out = self.send(ScriptedChannel(drop={0, 1}), ScriptedChannel())
        assert out.status is Outcome.DELIVERED and out.attempts == 3

    def test_drop_everything(self):
        ch = ScriptedChannel(drop_all=True)
        out = self.send(ch)
        assert out.status is Outcome.FAILED and out.attempts == 3 and ch.sent == 3

    def test_lost_ack_retransmits_without_duplicate(self):
        rx = Receiver()
        out = send_reliable(ReliabilityState(), CommandPacket(MsgType.HAND_TOGGLE), ScriptedChannel(),
                            receiver=rx, ack_channel=ScriptedChannel(drop={0}))
        assert out.attempts == 2 and len(rx.delivered) == 1

    def test_pending_is_single(self):
        s = ReliabilityState()
        s.begin(CommandPacket(MsgType.HALT))
        with pytest.raises(RuntimeError):
            s.begin(CommandPacket(MsgType.HALT))

    def test_retry_budget(self):
        s = ReliabilityState(retry_limit=2)
        s.begin(CommandPacket(MsgType.HALT))
        assert [s.retry() for _ in range(4)] == [True, True, False, False]
        assert s.retries <= s.retry_limit

    def test_sequence_wraps(self):
        s = ReliabilityState(next_seq=255)
        assert s.begin(CommandPacket(MsgType.HALT)).seq == 255
        s.acknowledge(255)
        assert s.begin(CommandPacket(MsgType.HALT)).seq == 0
        assert is_newer(0, 255) and not is_newer(255, 0)

    def test_monte_carlo_delivery(self):
        rng = np.random.default_rng(2024)
        fwd = LossyChannel(0.3, 10.0, rng)
        back = LossyChannel(0.0, 10.0, rng)
        state = ReliabilityState()
        delivered = 0
        trials = 100_000
        for _ in range(trials):
            out = send_reliable(state, CommandPacket(MsgType.HAND_TOGGLE), fwd, ack_channel=back)
            delivered += out.status is Outcome.DELIVERED
        assert abs(delivered / trials - (1 - 0.3**3)) <= 0.005


class DupReorderChannel:
    """Duplicates every frame; the copy lands after the next frame's original."""

    def __init__(self, rng):
        self.rng = rng

    def transmit(self, frame, now_ms):
        first = now_ms + 5.0
        lag = 5.0 + float(self.rng.uniform(0, 150))
        return [(first, frame), (now_ms + lag, frame)]


class TestDedupe:
    def test_duplicates_and_reorder_never_redeliver(self):
        rng = np.random.default_rng(3)
        rx = Receiver()
        ch = DupReorderChannel(rng)
        arrivals = []
        for i in range(600):
            p = CommandPacket(MsgType.HAND_TOGGLE, i % 256)
            arrivals += ch.transmit(encode(p), i * 100.0)
        for t, frame in sorted(arrivals, key=lambda a: a[0]):
            rx.receive(frame, t)
        assert [p.seq for _, p in rx.delivered] == [i % 256 for i in range(600)]

    def test_ack_sent_for_duplicate(self):
        rx = Receiver()
        frame = encode(CommandPacket(MsgType.HAND_TOGGLE, 9))
        first = rx.receive(frame)
        again = rx.receive(frame)
        assert first[0] is not None and again[0] is None and again[1] == first[1]

    def test_corrupt_counted(self):
        rx = Receiver()
        frame = bytearray(encode(CommandPacket(MsgType.HALT, 1)))
        frame[-1] ^= 1
        assert rx.receive(bytes(frame)) == (None, None) and rx.rejected == 1


def halt_time(tick_hz, last=0.0, until=5000.0):
    st_ = WatchdogState(2000.0, last)
    step = 1000.0 / tick_hz
    t = 0.0
    while t <= until:
        if watchdog_tick(st_, t):
            return t
        t += step
    return None


class TestWatchdog:
    @pytest.mark.parametrize("hz", [10, 50, 100, 1000])
    def test_halt_within_one_tick(self, hz):
        t = halt_time(hz)
        assert 2000.0 < t <= 2000.0 + 1000.0 / hz

    def test_tick_at_2001(self):
        assert watchdog_tick(WatchdogState(), 2001.0)
        assert not watchdog_tick(WatchdogState(), 2000.0)

    def test_latching(self):
        s = WatchdogState()
        assert watchdog_tick(s, 2500.0)
        assert not any(watchdog_tick(s, t) for t in (2600.0, 3000.0, 9000.0))
        s.feed(9000.0)
        assert s.halted
        s.resume(9100.0)
        assert not s.halted and not watchdog_tick(s, 9200.0)

    @given(st.floats(1.0, 1900.0), st.sampled_from([10, 50, 100]))
    def test_regular_commands_never_halt(self, period, hz):
        s = WatchdogState()
        step = 1000.0 / hz
        next_cmd = period
        t = 0.0
        while t < 20_000.0:
            while next_cmd <= t:
                s.feed(next_cmd)
                next_cmd += period
            assert not watchdog_tick(s, t)
            t += step
