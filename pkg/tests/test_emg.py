import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neuroarm.emg import (
    Band,
    BandState,
    CalibrationError,
    Direction,
    EmgCalibration,
    EmgPipeline,
    calibrate,
    classify_band,
    debounce_band,
    normalize_envelope,
)
from neuroarm.signal import Quality, TimedSample

MOVING = st.sampled_from([Band.REST, Band.EXTEND, Band.CONTRACT])


def run_length_oracle(bands, d):
    """(index, band) of the d-th frame of each maximal movement run of length >= d."""
    out = []
    i = 0
    while i < len(bands):
        j = i
        while j + 1 < len(bands) and bands[j + 1] is bands[i]:
            j += 1
        if bands[i] is not Band.REST and j - i + 1 >= d:
            out.append((i + d - 1, bands[i]))
        i = j + 1
    return out


def debounced(bands, d=8):
    st_ = BandState(d)
    out = []
    for i, b in enumerate(bands):
        cmd = debounce_band(st_, b)
        assert st_.counter <= d
        if cmd is not None:
            out.append((i, b))
            assert cmd.direction is (Direction.FLEX if b is Band.CONTRACT else Direction.EXTEND)
    return out


class TestNormalize:
    def test_endpoints(self):
        assert normalize_envelope(5.0, 1.0, 5.0) == 1.0
        assert normalize_envelope(0.0, 1.0, 5.0) == 0.0
        assert normalize_envelope(3.0, 1.0, 5.0) == 0.5

    def test_degenerate_range(self):
        with pytest.raises(CalibrationError):
            normalize_envelope(1.0, 2.0, 2.0)


class TestCalibration:
    def test_thresholds(self):
        cal = EmgCalibration(0.1, 0.5, 0.9)
        assert cal.t1 == pytest.approx(0.3) and cal.t2 == pytest.approx(0.7)

    def test_ordering_errors_name_pair(self):
        with pytest.raises(CalibrationError, match="e_rest.*e_mid"):
            EmgCalibration(0.5, 0.5, 0.9)
        with pytest.raises(CalibrationError, match="e_mid.*e_max"):
            EmgCalibration(0.1, 0.9, 0.5)

    @pytest.mark.parametrize("a,b", [(0.0, 0.5), (0.5, 1.0), (-0.1, 0.5)])
    def test_margins_open_interval(self, a, b):
        with pytest.raises(CalibrationError, match="margin"):
            EmgCalibration(0.1, 0.5, 0.9, a, b)

    def test_from_recordings(self):
        rng = np.random.default_rng(0)
        cal = calibrate(rng.normal(0.1, 0.01, 200), rng.normal(0.5, 0.01, 200), rng.normal(0.9, 0.01, 200))
        assert cal.e_rest < cal.t1 < cal.e_mid < cal.t2 < cal.e_max
        r = (np.asarray([0.1]) - cal.raw_min) / (cal.raw_max - cal.raw_min)
        assert cal.e_rest > r[0]  # mean + std sits above the rest mean

    def test_empty_recording(self):
        with pytest.raises(CalibrationError, match="rest"):
            calibrate([], [0.5], [0.9])

    def test_entries_round_trip(self):
        cal = EmgCalibration(0.11, 0.52, 0.93, 0.4, 0.6, 0.01, 1.2)
        entries = cal.to_entries()
        assert {"T1", "T2", "alpha_margin", "beta_margin", "raw_min", "raw_max"} <= set(entries)
        assert EmgCalibration.from_entries(entries) == cal

    @given(
        st.lists(st.integers(0, 1000), min_size=3, max_size=3, unique=True).map(lambda xs: [x / 1000 for x in sorted(xs)]),
        st.floats(0.01, 0.98),
        st.floats(0.001, 0.01),
    )
    def test_thresholds_increase_with_margin(self, levels, a, da):
        lo, mid, hi = levels
        c1 = EmgCalibration(lo, mid, hi, a, a)
        c2 = EmgCalibration(lo, mid, hi, a + da, a + da)
        assert c2.t1 > c1.t1 and c2.t2 > c1.t2
        assert lo < c1.t1 < mid < c1.t2 < hi


class TestBands:
    cal = EmgCalibration(0.1, 0.5, 0.9)

    def test_boundaries(self):
        assert classify_band(0.0, self.cal) is Band.REST
        assert classify_band(self.cal.t1, self.cal) is Band.EXTEND
        assert classify_band(self.cal.t2, self.cal) is Band.CONTRACT
        assert classify_band(0.3, (0.3, 0.7)) is Band.EXTEND

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, a, b):
        order = [Band.REST, Band.EXTEND, Band.CONTRACT]
        lo, hi = sorted((a, b))
        assert order.index(classify_band(lo, self.cal)) <= order.index(classify_band(hi, self.cal))


class TestDebounce:
    def test_eight_contract(self):
        assert debounced([Band.CONTRACT] * 8) == [(7, Band.CONTRACT)]

    def test_seven_then_rest(self):
        assert debounced([Band.CONTRACT] * 7 + [Band.REST]) == []

    def test_alternating(self):
        assert debounced([Band.EXTEND, Band.CONTRACT] * 200) == []

    def test_saturates_on_long_run(self):
        assert debounced([Band.EXTEND] * 50) == [(7, Band.EXTEND)]

    def test_repeat_mode(self):
        st_ = BandState(8, repeat=True)
        fired = [i for i in range(24) if debounce_band(st_, Band.CONTRACT) is not None]
        assert fired == [7, 15, 23]

    @settings(max_examples=300)
    @given(st.lists(MOVING, max_size=400), st.integers(1, 12))
    def test_matches_run_length_oracle(self, bands, d):
        assert debounced(bands, d) == run_length_oracle(bands, d)

    def test_long_random_streams(self):
        rng = np.random.default_rng(4)
        choices = [Band.REST, Band.EXTEND, Band.CONTRACT]
        for _ in range(5):
            # sticky Markov chain so long runs actually occur
            bands = [Band.REST]
            for _ in range(9999):
                bands.append(bands[-1] if rng.random() < 0.9 else choices[rng.integers(3)])
            assert debounced(bands) == run_length_oracle(bands, 8)


class TestPipeline:
    def test_held_contraction_fires_once(self):
        cal = EmgCalibration(0.1, 0.5, 0.9)
        pipe = EmgPipeline(cal, frame_hz=40.0, fc_hz=1000.0)
        samples = [TimedSample(i * 25.0, 0.05) for i in range(10)] + [TimedSample(250 + i * 25.0, 0.95) for i in range(30)]
        cmds = [d for d in pipe.run(samples) if d.command is not None]
        assert len(cmds) == 1 and cmds[0].command.direction is Direction.FLEX

    def test_dropout_breaks_run(self):
        cal = EmgCalibration(0.1, 0.5, 0.9)
        pipe = EmgPipeline(cal, fc_hz=1000.0)
        s = [TimedSample(i * 25.0, 0.95, Quality.POOR if i == 5 else Quality.GOOD) for i in range(12)]
        assert not any(d.command for d in pipe.run(s))
