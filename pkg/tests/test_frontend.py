import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from audiovmaf import frontend as fe
from audiovmaf.config import CalibrationParams, FrontendConfig
from audiovmaf.errors import FrontendError

from fixture_audio import SR, sine

CFG = FrontendConfig()
BIN_HZ = SR / 2048  # 23.4375
CENTERS = fe.erb_band_centers(CFG)
REF_AMP = 10 ** (-25 / 20)


def test_erb_rate_at_1khz():
    # 21.4 * log10(1 + 4.37)
    assert fe.erb_rate(1000.0) == pytest.approx(21.4 * math.log10(5.37), abs=1e-12)
    assert fe.erb_rate(1000.0) == pytest.approx(15.62, abs=0.01)
    assert fe.inverse_erb_rate(fe.erb_rate(1234.5)) == pytest.approx(1234.5)


def test_band_centers_grid_and_order():
    assert len(CENTERS) == 80
    assert CENTERS[0] == pytest.approx(BIN_HZ)  # 30 Hz snaps to bin 1
    assert CENTERS[-1] == pytest.approx(18000.0)  # 768 * 23.4375
    k = CENTERS / BIN_HZ
    np.testing.assert_allclose(k, np.round(k), atol=1e-9)
    assert np.all(np.diff(CENTERS) > 0)


def test_band_centers_follow_nearest_bin_where_free():
    ideal = fe.inverse_erb_rate(np.linspace(fe.erb_rate(30), fe.erb_rate(18000), 80))
    nearest = np.floor(ideal / BIN_HZ + 0.5)
    k = np.round(CENTERS / BIN_HZ)
    # above the crowded low-frequency region every band sits on its nearest bin
    assert np.array_equal(k[20:], nearest[20:])
    # collisions are only ever resolved upwards, by a couple of bins at most
    assert np.all(k >= nearest)
    assert np.max(k - nearest) <= 2


def test_band_collision_raise_mode():
    with pytest.raises(FrontendError, match="band collision"):
        fe.erb_band_centers(CFG, on_collision="raise")
    coarse = FrontendConfig(num_bands=20)
    centers = fe.erb_band_centers(coarse, on_collision="raise")
    assert len(centers) == 20


def test_gammatone_weights():
    fc = 1000.0
    erb = fe.erb_bandwidth(fc)
    assert erb == pytest.approx(24.7 * 5.37)
    assert erb == pytest.approx(132.6, abs=0.05)
    b = 1.019 * erb
    w = fe.gammatone_weights(fc, [fc, fc - b, fc + b, fc + 10 * b])
    assert w[0] == 1.0
    assert w[1] == pytest.approx(0.0625, rel=1e-12)
    assert w[2] == pytest.approx(0.0625, rel=1e-12)
    assert w[3] < 1e-7


def test_threshold_in_quiet_values():
    assert fe.threshold_in_quiet(1000.0) == pytest.approx(3.64 - 6.5 * math.exp(-0.6 * 5.29) + 1e-3, abs=1e-12)
    assert fe.threshold_in_quiet(1000.0) == pytest.approx(3.37, abs=0.005)
    # 3.64 * 10**0.8 dominates; the other two terms add about -0.014
    assert fe.threshold_in_quiet(100.0) == pytest.approx(
        3.64 * 10 ** 0.8 - 6.5 * math.exp(-0.6 * 3.2 ** 2) + 1e-7, abs=1e-12
    )
    assert fe.threshold_in_quiet(100.0) == pytest.approx(22.9, abs=0.1)
    grid = np.linspace(2000, 5000, 301)
    tq = fe.threshold_in_quiet(grid)
    assert abs(grid[np.argmin(tq)] - 3300) < 100
    with pytest.raises(FrontendError):
        fe.threshold_in_quiet(10.0)
    with pytest.raises(FrontendError):
        fe.threshold_in_quiet(25000.0)


@pytest.mark.parametrize("k", [5, 43, 200, 700])
def test_fft_power_matches_closed_form_hann(k):
    # periodic Hann, on-bin sine of amplitude A: |X_k|^2 = A^2/4, |X_{k±1}|^2 = A^2/16, else 0
    amp = 0.3
    p = fe.frame_power_spectra(sine(k * BIN_HZ, amp, duration=0.2, phase=0.7))
    db = lambda v: 10 * np.log10(v)  # noqa: E731
    assert abs(db(p[0, k]) - db(amp ** 2 / 4)) < 0.1
    assert abs(db(p[0, k + 1]) - db(amp ** 2 / 16)) < 0.1
    assert abs(db(p[0, k - 1]) - db(amp ** 2 / 16)) < 0.1
    assert p[0, k + 3] < 1e-20


def test_band_weight_normalisation_against_closed_form():
    weights = fe.band_weights(CFG)
    bins = np.arange(1025) * BIN_HZ
    for i in (3, 40, 79):
        fc = CENTERS[i]
        raw = fe.gammatone_weights(fc, bins)
        k = int(round(fc / BIN_HZ))
        gain = 1.0 + 0.25 * (raw[k - 1] + (raw[k + 1] if k + 1 < len(raw) else 0.0))
        np.testing.assert_allclose(weights[i], raw / gain, rtol=1e-12)


def test_sine_at_band_center_peaks_in_that_band():
    for i in (10, 45, 70):
        spec = fe.power_spectrogram(sine(CENTERS[i], 1.0, duration=0.2))
        assert np.all(np.argmax(spec.levels, axis=0) == i)


def test_silence_gives_zero_power_and_gated_levels():
    spec = fe.power_spectrogram(np.zeros(SR))
    assert np.all(spec.levels == 0)
    cal = fe.calibrate_and_gate(spec)
    assert np.all(cal.levels == 0)


def test_too_short():
    with pytest.raises(FrontendError, match="too short"):
        fe.power_spectrogram(np.zeros(2047))


@given(st.integers(min_value=2048, max_value=200_000))
def test_column_count(n):
    assert fe.num_columns(n) == (n - 2048) // 1600 + 1


def test_column_count_matches_spectrogram():
    for n in (2048, 3647, 3648, 48000):
        assert fe.power_spectrogram(np.ones(n) * 0.1).num_columns == (n - 2048) // 1600 + 1


def test_calibration_at_1khz():
    i = int(np.argmin(np.abs(CENTERS - 1000)))
    spec = fe.erb_spectrogram(sine(CENTERS[i], REF_AMP, duration=1.0, phase=0.2))
    assert np.all(np.abs(spec.levels[i] - 85.0) <= 0.5)


def test_calibration_across_band_centers():
    idx = np.nonzero((CENTERS >= 100) & (CENTERS <= 16000))[0]
    for i in idx:
        spec = fe.erb_spectrogram(sine(CENTERS[i], REF_AMP, duration=2048 / SR, phase=1.1))
        assert abs(spec.levels[i, 0] - 85.0) <= 0.5, CENTERS[i]


def test_calibration_offset_is_analytic():
    # amplitude 10^(-25/20) -> band power A^2/4 -> 85 dB SPL
    assert fe.calibration_offset() == pytest.approx(85 + 25 + 10 * math.log10(4))
    custom = CalibrationParams(dbfs_ref=-20.0, spl_ref=90.0)
    assert fe.calibration_offset(custom) == pytest.approx(90 + 20 + 10 * math.log10(4))


def test_quiet_tone_is_gated():
    i = int(np.argmin(np.abs(CENTERS - 1000)))
    amp = 10 ** (-120 / 20)
    level = 85 + (-120 + 25)  # -10 dB SPL
    assert level < fe.threshold_in_quiet(CENTERS[i])
    spec = fe.erb_spectrogram(sine(CENTERS[i], amp, duration=0.5))
    assert np.all(spec.levels[i] == 0)


def test_gated_cells_are_zero_or_above_threshold(rng):
    x = 0.01 * rng.standard_normal(SR)
    spec = fe.erb_spectrogram(x)
    tq = fe.threshold_in_quiet(spec.band_centers)[:, None]
    lv = spec.levels
    assert np.all((lv == 0) | (lv >= tq))
    assert np.any(lv > 0)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=1e-3, max_value=1.0))
def test_scaling_shifts_levels_exactly(a):
    x = np.random.default_rng(3).standard_normal(8000) * 0.2
    p1 = fe.power_spectrogram(x).levels
    p2 = fe.power_spectrogram(a * x).levels
    with np.errstate(divide="ignore"):
        diff = 10 * np.log10(p2) - 10 * np.log10(p1)
    np.testing.assert_allclose(diff, 20 * np.log10(a), atol=1e-6)


@pytest.mark.parametrize("i", [5, 20, 40, 60, 76])
def test_band_leakage(i):
    spec = fe.erb_spectrogram(sine(CENTERS[i], REF_AMP, duration=0.2))
    lv = spec.levels[:, 0]
    assert lv[i] >= lv[i - 3] + 10
    assert lv[i] >= lv[i + 3] + 10


def test_spectrogram_dump_roundtrip(tmp_path, rng):
    spec = fe.erb_spectrogram(0.1 * rng.standard_normal(10000))
    path = tmp_path / "s.erbs"
    fe.save_spectrogram(spec, path)
    raw = path.read_bytes()
    assert raw[:4] == b"ERBS"
    assert len(raw) == 20 + 4 * spec.levels.size
    back = fe.load_spectrogram(path, spec.band_centers)
    np.testing.assert_array_equal(back.levels, spec.levels.astype(np.float32))
    assert back.hop == 1600 and back.sample_rate == SR


def test_config_invariants():
    with pytest.raises(Exception):
        FrontendConfig(hop=1000).validate()
    with pytest.raises(Exception):
        FrontendConfig(f_max=30000).validate()
