"""Audio ingestion: decode, resample, mid downmix and time alignment."""

from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.io import wavfile

from . import engine
from .errors import DecoderError, MediaError, NoAudioStreamError, SilentSignalError

log = logging.getLogger(__name__)


@dataclass
class AudioBuffer:
    """Multichannel PCM, shape ``(channels, samples)``, full scale = 1.0."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 1:
            s = s[np.newaxis, :]
        if s.ndim != 2 or s.shape[0] not in (1, 2):
            raise MediaError(f"unsupported channel layout with shape {s.shape}; expected mono or stereo")
        if self.sample_rate <= 0:
            raise MediaError("sample_rate must be positive")
        self.samples = s

    @property
    def channel_layout(self) -> str:
        return "stereo" if self.samples.shape[0] == 2 else "mono"

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    def __len__(self):
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class AlignmentReport:
    lag_samples: int
    peak_correlation: float


def _pcm_to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.uint8:
        out = (data.astype(np.float64) - 128.0) / 128.0
    elif np.issubdtype(data.dtype, np.integer):
        # scipy left-justifies 24-bit PCM into int32
        out = data.astype(np.float64) / float(-np.iinfo(data.dtype).min)
    else:
        out = data.astype(np.float64)
    out = out.T if out.ndim == 2 else out
    return np.clip(out, -1.0, 1.0)


def read_wav(path) -> AudioBuffer:
    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise DecoderError(f"{path}: {exc}") from exc
    return AudioBuffer(_pcm_to_float(data), int(rate))


def write_wav(path, buf: AudioBuffer, subtype: str = "float") -> None:
    """Write ``buf`` as WAV. ``subtype`` is ``"float"`` (32-bit float) or ``"pcm16"``."""
    data = buf.samples.T
    if subtype == "pcm16":
        data = np.round(np.clip(data, -1.0, 1.0) * 32767.0).astype(np.int16)
    else:
        data = data.astype(np.float32)
    wavfile.write(path, buf.sample_rate, data)


def resample(buf: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Polyphase windowed-sinc resampling (Kaiser, beta 8.6) to ``target_rate``."""
    if buf.sample_rate == target_rate:
        return buf
    ratio = Fraction(int(target_rate), int(buf.sample_rate))
    out = signal.resample_poly(
        buf.samples, ratio.numerator, ratio.denominator, axis=1, window=("kaiser", 8.6)
    )
    return AudioBuffer(np.clip(out, -1.0, 1.0), int(target_rate))


def _decode_with_ffmpeg(path: Path, ffmpeg=None) -> AudioBuffer:
    exe = engine.find_ffmpeg(ffmpeg)
    fd, tmp = tempfile.mkstemp(suffix=".wav")
    os.close(fd)
    try:
        proc = engine.run([
            exe, "-hide_banner", "-nostdin", "-v", "error", "-y",
            "-i", path, "-map", "0:a:0", "-vn", "-c:a", "pcm_f32le", "-f", "wav", tmp,
        ])
        if proc.returncode != 0:
            msg = engine.tail(proc.stderr)
            if "matches no streams" in msg or "does not contain any stream" in msg:
                raise NoAudioStreamError(f"no audio stream in {path}: {msg}")
            raise DecoderError(f"ffmpeg failed to decode {path}: {msg}")
        return read_wav(tmp)
    finally:
        os.unlink(tmp)


def extract_audio(container_path, target_rate: int = 48000, ffmpeg=None) -> AudioBuffer:
    """Decode the first audio stream of ``container_path`` at ``target_rate``.

    WAV files are read natively; anything else goes through ffmpeg.
    """
    path = Path(container_path)
    if not path.exists():
        raise MediaError(f"no such file: {path}")
    buf = None
    if path.suffix.lower() in (".wav", ".wave"):
        try:
            buf = read_wav(path)
        except DecoderError:
            # e.g. WAVE_FORMAT_EXTENSIBLE variants scipy rejects
            log.debug("native WAV read failed for %s; falling back to ffmpeg", path)
    if buf is None:
        buf = _decode_with_ffmpeg(path, ffmpeg)
    return resample(buf, target_rate)


def downmix_mid(buf: AudioBuffer) -> AudioBuffer:
    """Mid signal ``0.5 * (L + R)`` of a stereo buffer."""
    if buf.channel_layout != "stereo":
        raise MediaError("already mono")
    return AudioBuffer(0.5 * (buf.samples[0] + buf.samples[1]), buf.sample_rate)


def _mono(buf: AudioBuffer) -> np.ndarray:
    return downmix_mid(buf).samples[0] if buf.channel_layout == "stereo" else buf.samples[0]


def time_align(ref: AudioBuffer, deg: AudioBuffer, max_lag_s: float = 0.25):
    """Shift ``deg`` so it lines up with ``ref``.

    The lag maximising the normalised cross-correlation of the mid downmixes,
    ``sum(ref[n] * deg[n + lag]) / (|ref| |deg|)``, is searched over
    ``[-max_lag, max_lag]`` samples. A positive lag means ``deg`` is late.

    Returns
    -------
    aligned : AudioBuffer
        ``deg`` advanced by ``lag`` samples, zero-padded at the vacated edge,
        same length as ``deg``.
    report : AlignmentReport
    """
    if ref.sample_rate != deg.sample_rate:
        raise MediaError("time_align needs equal sample rates")
    x = _mono(ref)
    y = _mono(deg)
    nx = np.sqrt(np.dot(x, x))
    ny = np.sqrt(np.dot(y, y))
    if nx == 0 or ny == 0:
        raise SilentSignalError("silent signal")
    max_lag = int(round(max_lag_s * ref.sample_rate))

    # full[k] = sum_n x[n] * y[n + k - (len(x) - 1)]
    full = signal.correlate(y, x, mode="full", method="fft")
    zero = len(x) - 1
    lo = max(-max_lag, -(len(x) - 1))
    hi = min(max_lag, len(y) - 1)
    window = full[zero + lo: zero + hi + 1]
    lag = lo + int(np.argmax(window))

    # exact value at the chosen lag, not the FFT estimate
    if lag >= 0:
        n = min(len(x), len(y) - lag)
        peak = np.dot(x[:n], y[lag:lag + n])
    else:
        n = min(len(x) + lag, len(y))
        peak = np.dot(x[-lag:-lag + n], y[:n])
    peak = float(np.clip(peak / (nx * ny), -1.0, 1.0))

    shifted = np.zeros_like(deg.samples)
    if lag >= 0:
        shifted[:, :deg.samples.shape[1] - lag] = deg.samples[:, lag:]
    else:
        shifted[:, -lag:] = deg.samples[:, :lag]
    log.debug("alignment lag=%d peak=%.6f", lag, peak)
    return AudioBuffer(shifted, deg.sample_rate), AlignmentReport(lag, peak)


def match_length(buf: AudioBuffer, n: int) -> AudioBuffer:
    """Trim or zero-pad ``buf`` to ``n`` samples."""
    cur = len(buf)
    if cur == n:
        return buf
    if cur > n:
        return AudioBuffer(buf.samples[:, :n], buf.sample_rate)
    pad = np.zeros((buf.num_channels, n - cur))
    return AudioBuffer(np.concatenate([buf.samples, pad], axis=1), buf.sample_rate)
