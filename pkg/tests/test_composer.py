import colorsys
import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from audiovmaf import composer as cp
from audiovmaf.config import ComposerConfig
from audiovmaf.errors import ComposerError
from audiovmaf.frontend import ErbSpectrogram, erb_spectrogram

from fixture_audio import SR, music_like

CFG = ComposerConfig()


def fake_spec(levels):
    levels = np.asarray(levels, dtype=np.float64)
    return ErbSpectrogram(levels, np.arange(1, levels.shape[0] + 1) * 23.4375, 1 / 30, calibrated=True)


def random_specs(n_signals, ncol=50, seed=0):
    rng = np.random.default_rng(seed)
    return [fake_spec(rng.uniform(30, 115, (80, ncol))) for _ in range(n_signals)]


def test_tile_shapes():
    assert cp.assemble_tile(random_specs(3), 10).shape == (240, 32)
    assert cp.assemble_tile(random_specs(1), 10).shape == (80, 32)


def test_tile_padding_at_start():
    specs = random_specs(3)
    tile = cp.assemble_tile(specs, 0)
    assert np.all(tile[:, :31] == 0)
    np.testing.assert_array_equal(tile[:80, 31], specs[0].levels[::-1, 0])


def test_tile_window_and_orientation():
    specs = random_specs(3)
    tile = cp.assemble_tile(specs, 40)
    for s, spec in enumerate(specs):
        block = tile[80 * s: 80 * (s + 1)]
        np.testing.assert_array_equal(block, spec.levels[::-1, 9:41])
    # highest band in the top row
    assert np.array_equal(tile[0], specs[0].levels[79, 9:41])


def test_identical_channels_give_identical_strips():
    x = music_like(1.0, stereo=False)
    spec = erb_spectrogram(x)
    tile = cp.assemble_tile([spec, spec, spec], 20)
    np.testing.assert_array_equal(tile[:80], tile[80:160])
    np.testing.assert_array_equal(tile[:80], tile[160:])


def test_frame_out_of_range():
    with pytest.raises(ComposerError, match="frame out of range"):
        cp.assemble_tile(random_specs(1, ncol=5), 5)


def test_replicate_counts():
    tile = np.arange(240 * 32, dtype=float).reshape(240, 32)
    img = cp.replicate(tile, CFG)
    assert img.shape == (480, 640)
    blocks = img.reshape(2, 240, 20, 32).transpose(0, 2, 1, 3)
    assert np.all(blocks == tile)
    mono = np.arange(80 * 32, dtype=float).reshape(80, 32)
    blocks = cp.replicate(mono, CFG).reshape(6, 80, 20, 32).transpose(0, 2, 1, 3)
    assert np.all(blocks == mono)
    const = cp.replicate(np.full((80, 32), 7.0), CFG)
    assert np.all(const == 7.0)


def test_replicate_off_places_single_tile():
    tile = np.full((240, 32), 90.0)
    img = cp.replicate(tile, dataclasses.replace(CFG, replication=False))
    assert np.all(img[:240, :32] == 90.0)
    img[:240, :32] = 0
    assert np.all(img == 0)


def test_replicate_rejects_non_dividing_tile():
    with pytest.raises(ComposerError, match="tile does not tile image"):
        cp.replicate(np.zeros((70, 32)), CFG)


def test_quantize_points():
    q = cp.quantize_db([110.0, 40.0, 75.0, 0.0, 200.0, 20.0], CFG)
    assert q.tolist() == [255, 0, 128, 0, 255, 0]


@given(st.lists(st.floats(min_value=-50, max_value=200), min_size=2, max_size=30))
def test_quantize_monotone(levels):
    levels = sorted(levels)
    q = cp.quantize_db(levels, CFG).astype(int)
    gated = np.asarray(levels) == 0.0
    q_ungated = q[~gated]
    assert np.all(np.diff(q_ungated) >= 0)


def test_hsv_lut_entries():
    lut = cp.hsv_lut()
    assert lut.shape == (256, 3) and lut.dtype == np.uint8
    assert tuple(lut[0]) == (255, 0, 0)
    assert tuple(lut[128]) == (0, 255, 255)
    assert tuple(lut[255]) == (255, 0, 6)


def test_hsv_lut_against_sector_formula():
    # independent sector formula (colorsys is only used inside the module)
    lut = cp.hsv_lut()
    for i in range(256):
        h6 = i / 256 * 6
        sector, f = int(h6), h6 - int(h6)
        q, t = 1 - f, f
        rgb = [(1, t, 0), (q, 1, 0), (0, 1, t), (0, q, 1), (t, 0, 1), (1, 0, q)][sector]
        expected = tuple(int(np.floor(c * 255 + 0.5)) for c in rgb)
        assert tuple(lut[i]) == expected, i
    assert colorsys  # the module's choice of helper is not asserted here


def test_lut_injective():
    lut = cp.hsv_lut()
    assert len({tuple(r) for r in lut}) == 256


def test_hsv_luma_is_not_monotone():
    lut = cp.hsv_lut().astype(float)
    luma = lut @ [0.299, 0.587, 0.114]
    assert np.any(np.diff(luma) > 0) and np.any(np.diff(luma) < 0)


def test_grayscale_pixels():
    lut = cp.colormap_lut("grayscale")
    for q in (0, 17, 128, 255):
        assert tuple(lut[q]) == (q, q, q)


def test_stream_matches_per_frame_composition():
    specs = random_specs(3, ncol=40)
    for cfg in (CFG, dataclasses.replace(CFG, replication=False), dataclasses.replace(CFG, colormap="grayscale")):
        frames = list(cp.compose_stream(specs, cfg))
        assert len(frames) == 40
        for t in (0, 1, 31, 32, 39):
            ref = cp.compose_frame(specs, t, cfg)
            np.testing.assert_array_equal(frames[t].pixels, ref.pixels)
            assert frames[t].frame_index == t


def test_tile_copy_equality():
    for n_sig, th in ((3, 240), (1, 80)):
        frame = cp.compose_frame(random_specs(n_sig, ncol=40, seed=n_sig), 35, CFG)
        px = frame.pixels
        r, c = np.meshgrid(np.arange(480), np.arange(640), indexing="ij")
        np.testing.assert_array_equal(px, px[r % th, c % 32])


def test_every_pixel_is_lut_entry():
    frame = cp.compose_frame(random_specs(3), 45, CFG)
    lut = {tuple(v) for v in cp.hsv_lut()}
    assert {tuple(v) for v in frame.pixels.reshape(-1, 3)} <= lut


def test_frame_count_for_ten_seconds():
    x = music_like(10.0, stereo=False)
    spec = erb_spectrogram(x)
    assert cp.frame_count([spec]) == (480000 - 2048) // 1600 + 1 == 299
    assert sum(1 for _ in cp.compose_stream([spec], CFG)) == 299


def test_determinism():
    x = music_like(2.0)
    a = [erb_spectrogram(c) for c in x]
    b = [erb_spectrogram(c) for c in x.copy()]
    fa = b"".join(f.pixels.tobytes() for f in cp.compose_stream(a, CFG))
    fb = b"".join(f.pixels.tobytes() for f in cp.compose_stream(b, CFG))
    assert fa == fb


def test_silence_is_uniform_index_zero():
    spec = erb_spectrogram(np.zeros(SR))
    for frame in cp.compose_stream([spec], CFG):
        assert np.all(frame.pixels == cp.hsv_lut()[0])


def test_png_roundtrip(tmp_path):
    from PIL import Image

    frame = cp.compose_frame(random_specs(3), 33, CFG)
    path = tmp_path / "f.png"
    cp.save_png(frame, path)
    img = Image.open(path)
    assert img.mode == "RGB" and img.size == (640, 480)
    np.testing.assert_array_equal(np.asarray(img), frame.pixels)


def test_mismatched_spectrograms():
    with pytest.raises(ComposerError):
        cp.assemble_tile([fake_spec(np.zeros((80, 5))), fake_spec(np.zeros((80, 6)))], 0)
