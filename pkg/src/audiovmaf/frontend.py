"""ERB-band, gammatone-weighted power spectrograms calibrated to dB SPL.

Pipeline per channel: Hann-windowed FFT power at the video frame rate, band
powers from gammatone magnitude weights over the FFT bins, then a fixed
dBFS -> dB SPL offset and threshold-in-quiet gating.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import get_window

from .config import CalibrationParams, FrontendConfig
from .errors import FrontendError


def erb_rate(f):
    """Glasberg & Moore ERB-rate, ``21.4 * log10(1 + 0.00437 f)``."""
    return 21.4 * np.log10(1.0 + 0.00437 * np.asarray(f, dtype=np.float64))


def inverse_erb_rate(e):
    return (10.0 ** (np.asarray(e, dtype=np.float64) / 21.4) - 1.0) / 0.00437


def erb_bandwidth(fc):
    return 24.7 * (0.00437 * np.asarray(fc, dtype=np.float64) + 1.0)


def erb_band_centers(cfg: FrontendConfig, sample_rate=None, on_collision="shift"):
    """Band centres uniformly spaced in ERB rate, snapped to FFT bin centres.

    With 80 bands from 30 Hz and a 2048-point FFT at 48 kHz, the lowest bands
    are narrower than one bin and a few snap onto the same bin. With
    ``on_collision="shift"`` (default) a colliding band moves up to the next
    free bin so centres stay distinct and increasing; ``"raise"`` raises
    :class:`FrontendError` instead.

    Returns
    -------
    ndarray of float, in Hz
    """
    sr = cfg.sample_rate if sample_rate is None else sample_rate
    if cfg.f_max > sr / 2:
        raise FrontendError("f_max above Nyquist")
    ideal = inverse_erb_rate(np.linspace(erb_rate(cfg.f_min), erb_rate(cfg.f_max), cfg.num_bands))
    bins = _snap_bins(ideal, sr, cfg.window_len, on_collision)
    return bins * (sr / cfg.window_len)


def _snap_bins(ideal_hz, sample_rate, window_len, on_collision):
    spacing = sample_rate / window_len
    bins = np.floor(ideal_hz / spacing + 0.5).astype(np.int64)
    out = bins.copy()
    for i in range(1, len(out)):
        if out[i] <= out[i - 1]:
            if on_collision == "raise":
                raise FrontendError(
                    f"band collision: bands {i - 1} and {i} snap to FFT bin {bins[i]}"
                )
            out[i] = out[i - 1] + 1
    if out[-1] > window_len // 2:
        raise FrontendError("band collision: not enough FFT bins below Nyquist for all bands")
    return out


def gammatone_weights(center, bins):
    """Power-domain 4th-order gammatone magnitude response sampled at ``bins`` (Hz).

    ``w(f) = (1 + ((f - fc) / b)**2) ** -4`` with ``b = 1.019 * ERB(fc)``.
    """
    b = 1.019 * erb_bandwidth(center)
    d = (np.asarray(bins, dtype=np.float64) - center) / b
    return (1.0 + d * d) ** -4


def threshold_in_quiet(f):
    """Terhardt's absolute threshold of hearing in dB SPL, valid on 20 Hz - 20 kHz."""
    f = np.asarray(f, dtype=np.float64)
    if np.any((f < 20.0) | (f > 20000.0)):
        raise FrontendError("threshold_in_quiet defined for 20 Hz <= f <= 20 kHz")
    k = f / 1000.0
    return 3.64 * k ** -0.8 - 6.5 * np.exp(-0.6 * (k - 3.3) ** 2) + 1e-3 * k ** 4


@dataclass
class ErbSpectrogram:
    """Band levels ``[num_bands, num_columns]``, lowest band first.

    Before calibration ``levels`` holds linear band power; after
    :func:`calibrate_and_gate` it holds dB SPL with 0 marking gated cells.
    """

    levels: np.ndarray
    band_centers: np.ndarray
    column_period: float
    sample_rate: int = 48000
    hop: int = 1600
    calibrated: bool = False

    @property
    def num_bands(self):
        return self.levels.shape[0]

    @property
    def num_columns(self):
        return self.levels.shape[1]


@dataclass(frozen=True)
class _Analysis:
    window: np.ndarray
    weights: np.ndarray  # [bands, bins], gain-normalised
    centers: np.ndarray


def _hann(n):
    return get_window("hann", n, fftbins=True)


@lru_cache(maxsize=8)
def _analysis(cfg: FrontendConfig) -> _Analysis:
    cfg.validate()
    window = _hann(cfg.window_len)
    centers = erb_band_centers(cfg)
    bin_hz = np.arange(cfg.window_len // 2 + 1) * (cfg.sample_rate / cfg.window_len)
    weights = np.stack([gammatone_weights(fc, bin_hz) for fc in centers])
    # Normalise each band so a sine on its centre bin reads the same band power
    # as that bin alone. The Hann kernel leaks 1/4 of the centre power into
    # each neighbouring bin, so without this the band gain grows with fc.
    kernel = _hann_leakage(window)
    centre_bins = np.rint(centers / (cfg.sample_rate / cfg.window_len)).astype(int)
    gains = np.empty(len(centers))
    for i, k in enumerate(centre_bins):
        lo, hi = max(k - len(kernel) + 1, 0), min(k + len(kernel), len(bin_hz))
        offs = np.abs(np.arange(lo, hi) - k)
        gains[i] = np.dot(weights[i, lo:hi], kernel[offs])
    weights /= gains[:, None]
    return _Analysis(window, weights, centers)


def _hann_leakage(window):
    """Relative power of an on-bin sinusoid at bin offsets 0, 1, 2, ..."""
    spec = np.abs(np.fft.rfft(window)) ** 2
    rel = spec / spec[0]
    # periodic Hann: [1, 1/4], everything further out is rounding noise
    return rel[: np.nonzero(rel > 1e-12)[0].max() + 1]


def band_weights(cfg: FrontendConfig) -> np.ndarray:
    """Gammatone weight matrix ``[bands, bins]`` as used by :func:`power_spectrogram`."""
    return _analysis(cfg).weights.copy()


def num_columns(n_samples, cfg: FrontendConfig = FrontendConfig()):
    if n_samples < cfg.window_len:
        raise FrontendError("too short")
    return (n_samples - cfg.window_len) // cfg.hop + 1


def frame_power_spectra(x, cfg: FrontendConfig = FrontendConfig()) -> np.ndarray:
    """Hann-windowed FFT power per column, ``[columns, window_len // 2 + 1]``.

    Scaled by ``1 / sum(window)**2`` so a sine of amplitude A centred on a bin
    reads ``A**2 / 4`` there.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise FrontendError("power_spectrogram takes one channel")
    ncol = num_columns(len(x), cfg)
    window = _analysis(cfg).window
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.window_len)[:: cfg.hop][:ncol]
    spec = np.fft.rfft(frames * window, axis=1)
    return (spec.real ** 2 + spec.imag ** 2) / window.sum() ** 2


def power_spectrogram(x, cfg: FrontendConfig = FrontendConfig()) -> ErbSpectrogram:
    """Uncalibrated ERB band powers of a single channel."""
    an = _analysis(cfg)
    bands = an.weights @ frame_power_spectra(x, cfg).T
    return ErbSpectrogram(
        levels=bands,
        band_centers=an.centers.copy(),
        column_period=cfg.column_period,
        sample_rate=cfg.sample_rate,
        hop=cfg.hop,
    )


def calibration_offset(cal: CalibrationParams = CalibrationParams()) -> float:
    """dB added to ``10 log10(band power)`` to obtain dB SPL.

    A sine at ``dbfs_ref`` (amplitude ``10**(dbfs_ref/20)``) on a band centre has
    band power ``A**2 / 4`` after gain normalisation, and must map to ``spl_ref``.
    """
    amp = 10.0 ** (cal.dbfs_ref / 20.0)
    return cal.spl_ref - 10.0 * np.log10(amp * amp / 4.0)


def calibrate_and_gate(spec: ErbSpectrogram, cal: CalibrationParams = CalibrationParams()) -> ErbSpectrogram:
    if spec.calibrated:
        raise FrontendError("spectrogram already calibrated")
    with np.errstate(divide="ignore"):
        level = 10.0 * np.log10(spec.levels) + calibration_offset(cal)
    tq = threshold_in_quiet(spec.band_centers)[:, None]
    level = np.where(level < tq, 0.0, level)
    return ErbSpectrogram(level, spec.band_centers, spec.column_period, spec.sample_rate, spec.hop, True)


def erb_spectrogram(x, cfg: FrontendConfig = FrontendConfig()) -> ErbSpectrogram:
    """Calibrated, gated spectrogram of one channel."""
    return calibrate_and_gate(power_spectrogram(x, cfg), cfg.calibration)


_DUMP_MAGIC = b"ERBS"
_DUMP_HEADER = struct.Struct("<4sIIII")


def save_spectrogram(spec: ErbSpectrogram, path) -> None:
    """Binary dump: ``ERBS`` magic, uint32 bands, columns, sample_rate, hop, then float32 row-major."""
    with open(path, "wb") as fh:
        fh.write(_DUMP_HEADER.pack(_DUMP_MAGIC, spec.num_bands, spec.num_columns, spec.sample_rate, spec.hop))
        fh.write(np.ascontiguousarray(spec.levels, dtype="<f4").tobytes())


def load_spectrogram(path, band_centers=None) -> ErbSpectrogram:
    with open(path, "rb") as fh:
        magic, bands, cols, sr, hop = _DUMP_HEADER.unpack(fh.read(_DUMP_HEADER.size))
        if magic != _DUMP_MAGIC:
            raise FrontendError(f"{path}: not a spectrogram dump")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != bands * cols:
        raise FrontendError(f"{path}: truncated dump")
    if band_centers is None:
        band_centers = np.full(bands, np.nan)
    return ErbSpectrogram(data.reshape(bands, cols).astype(np.float64), np.asarray(band_centers), hop / sr, sr, hop, True)
