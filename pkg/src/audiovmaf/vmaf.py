"""Spectrogram videos in, VMAF scores out.

Frames are written losslessly (UT Video, planar RGB) so the engine sees exactly
the composed pixels; conversion to YUV 4:4:4 for libvmaf happens inside the
ffmpeg filter graph, identically for reference and coded streams.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import re
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from . import engine
from .composer import ComposedFrame, compose_stream
from .config import PipelineConfig
from .errors import (
    AudioVmafError,
    EngineError,
    EngineNotFoundError,
    FrameCountMismatchError,
    ModelNotFoundError,
    ReportParseError,
    VideoWriteError,
)
from .frontend import ErbSpectrogram, erb_spectrogram
from .mediaio import AudioBuffer, downmix_mid, extract_audio, match_length, time_align

log = logging.getLogger(__name__)

DEFAULT_MODEL = "vmaf_v0.6.1"
FPS = 30


@dataclass
class VmafResult:
    per_frame: list
    pooled: float
    model_id: str
    engine_version: str
    alignment: Optional[dict] = None
    artifacts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "pooled": self.pooled,
            "per_frame": list(self.per_frame),
            "model_id": self.model_id,
            "engine_version": self.engine_version,
        }
        if self.alignment is not None:
            out["alignment"] = dict(self.alignment)
        if self.artifacts:
            out["artifacts"] = dict(self.artifacts)
        return out


@dataclass(frozen=True)
class VideoInfo:
    frames: int
    width: int
    height: int
    fps: float


def write_video(frames: Iterable[ComposedFrame], path, ffmpeg=None, fps: int = FPS) -> int:
    """Encode ``frames`` losslessly to ``path``; returns the number of frames written."""
    it = iter(frames)
    try:
        first = next(it)
    except StopIteration:
        raise VideoWriteError("empty stream") from None
    h, w, _ = first.pixels.shape
    exe = engine.find_ffmpeg(ffmpeg)
    args = [
        exe, "-hide_banner", "-nostdin", "-v", "error", "-y",
        "-f", "rawvideo", "-pix_fmt", "rgb24", "-s", f"{w}x{h}", "-r", str(fps), "-i", "-",
        "-c:v", "utvideo", "-pix_fmt", "gbrp", "-r", str(fps), str(path),
    ]
    log.info("exec: %s", " ".join(str(a) for a in args))
    proc = subprocess.Popen(args, stdin=subprocess.PIPE, stderr=subprocess.PIPE)
    count = 0
    try:
        for frame in _chain(first, it):
            if frame.pixels.shape != (h, w, 3) or frame.pixels.dtype != np.uint8:
                raise VideoWriteError(f"frame {frame.frame_index} has shape {frame.pixels.shape}, expected {(h, w, 3)}")
            proc.stdin.write(np.ascontiguousarray(frame.pixels).tobytes())
            count += 1
        proc.stdin.close()
    except BrokenPipeError:
        pass
    except BaseException:
        proc.kill()
        proc.wait()
        raise
    err = proc.stderr.read().decode("utf-8", "replace")
    if proc.wait() != 0:
        raise VideoWriteError(f"ffmpeg failed writing {path}: {engine.tail(err)}")
    return count


def _chain(first, rest):
    yield first
    yield from rest


_STREAM_RE = re.compile(r"Stream #\d+:\d+.*?: Video: .*?, (\d+)x(\d+)[ ,].*?(?:([\d.]+) fps|([\d.]+) tbr)")


def probe_video(path, ffmpeg=None) -> VideoInfo:
    """Frame count, size and rate of the first video stream (packet count, no decode)."""
    exe = engine.find_ffmpeg(ffmpeg)
    if not Path(path).exists():
        raise EngineError(f"no such video: {path}")
    proc = engine.run(
        [exe, "-hide_banner", "-nostdin", "-i", path, "-map", "0:v:0", "-c", "copy", "-f", "framecrc", "-"],
        stdout=subprocess.PIPE,
    )
    if proc.returncode != 0:
        raise EngineError(f"cannot read {path}: {engine.tail(proc.stderr)}")
    m = _STREAM_RE.search(proc.stderr)
    if not m:
        raise EngineError(f"cannot determine video geometry of {path}")
    # framecrc: one line per packet after '#' headers; intra-only codecs have one packet per frame
    frames = sum(1 for ln in proc.stdout.splitlines() if ln and not ln.startswith(b"#"))
    fps = float(m.group(3) or m.group(4))
    return VideoInfo(frames, int(m.group(1)), int(m.group(2)), fps)


def read_video_frames(path, ffmpeg=None) -> np.ndarray:
    """Decode to an ``(n, h, w, 3)`` uint8 array (for inspection and tests)."""
    info = probe_video(path, ffmpeg)
    exe = engine.find_ffmpeg(ffmpeg)
    proc = engine.run(
        [exe, "-hide_banner", "-nostdin", "-v", "error", "-i", path, "-f", "rawvideo", "-pix_fmt", "rgb24", "-"],
        stdout=subprocess.PIPE,
    )
    if proc.returncode != 0:
        raise EngineError(f"cannot decode {path}: {engine.tail(proc.stderr)}")
    return np.frombuffer(proc.stdout, dtype=np.uint8).reshape(-1, info.height, info.width, 3)


def _escape(value: str) -> str:
    # option value nested in a filtergraph: escaped once per parsing level
    if "'" in value:
        raise EngineError(f"unsupported quote character in path {value!r}")
    return value.replace("\\", "\\\\\\\\").replace(":", "\\\\:")


def resolve_model(model: Optional[str] = None):
    """Return ``(filter_option, model_id)`` for a model name or JSON path.

    ``$AUDIOVMAF_VMAF_MODEL`` overrides the default when ``model`` is unset.
    """
    model = model or os.environ.get(engine.MODEL_ENV) or DEFAULT_MODEL
    if model.endswith(".json") or os.sep in model:
        if not Path(model).is_file():
            raise ModelNotFoundError(f"VMAF model file not found: {model}")
        return f"path={_escape(str(Path(model).resolve()))}", Path(model).stem
    name = model.removeprefix("version=")
    return f"version={name}", name


def run_vmaf(ref_video, deg_video, *, ffmpeg=None, model=None, n_threads: int = 0) -> VmafResult:
    """Score ``deg_video`` against ``ref_video`` with libvmaf; pooled = mean of frame scores."""
    exe = engine.find_ffmpeg(ffmpeg)
    model_opt, model_id = resolve_model(model)
    ref_info = probe_video(ref_video, exe)
    deg_info = probe_video(deg_video, exe)
    if ref_info.frames != deg_info.frames:
        raise FrameCountMismatchError(
            f"frame-count mismatch: reference has {ref_info.frames}, coded has {deg_info.frames}"
        )
    if (ref_info.width, ref_info.height) != (deg_info.width, deg_info.height):
        raise FrameCountMismatchError("reference and coded videos differ in dimensions")

    threads = n_threads or os.cpu_count() or 1
    with tempfile.TemporaryDirectory(prefix="audiovmaf-log-") as tmp:
        log_path = Path(tmp) / "vmaf.json"
        graph = (
            "[0:v]format=yuv444p[dis];[1:v]format=yuv444p[ref];"
            f"[dis][ref]libvmaf=model={model_opt}:log_fmt=json:log_path={_escape(str(log_path))}"
            f":n_threads={threads}"
        )
        proc = engine.run([
            exe, "-hide_banner", "-nostdin", "-v", "error",
            "-i", deg_video, "-i", ref_video, "-lavfi", graph, "-f", "null", "-",
        ])
        if proc.returncode != 0:
            msg = engine.tail(proc.stderr)
            if "No such filter" in msg and "libvmaf" in msg:
                raise EngineNotFoundError(f"{exe} was built without libvmaf: {msg}")
            if "model" in msg and ("could not" in msg or "not found" in msg):
                raise ModelNotFoundError(f"VMAF model {model_id!r} unavailable: {msg}")
            raise EngineError(f"VMAF run failed: {msg}")
        try:
            report = json.loads(log_path.read_text())
        except (OSError, ValueError) as exc:
            raise ReportParseError(f"unparsable VMAF report: {exc}") from exc
    result = parse_report(report, model_id, engine.ffmpeg_version(exe))
    if len(result.per_frame) != ref_info.frames:
        raise ReportParseError(
            f"report has {len(result.per_frame)} frames, videos have {ref_info.frames}"
        )
    return result


def parse_report(report: dict, model_id: str, engine_version: str = "unknown") -> VmafResult:
    """Extract per-frame VMAF from a libvmaf JSON log."""
    try:
        frames = sorted(report["frames"], key=lambda f: f["frameNum"])
        scores = [float(f["metrics"]["vmaf"]) for f in frames]
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportParseError(f"unexpected VMAF report layout: {exc!r}") from exc
    if not scores:
        raise ReportParseError("VMAF report contains no frames")
    libvmaf = report.get("version")
    version = f"{engine_version}; libvmaf {libvmaf}" if libvmaf else engine_version
    return VmafResult(scores, float(np.mean(scores)), model_id, version)


def signal_spectrograms(buf: AudioBuffer, cfg: PipelineConfig) -> list:
    """Calibrated spectrograms of the analysed signals: [L, R, M] for stereo, [x] for mono."""
    fcfg = cfg.frontend
    if buf.channel_layout == "stereo":
        chans = [buf.samples[0], buf.samples[1], downmix_mid(buf).samples[0]]
    else:
        chans = [buf.samples[0]]
    return [erb_spectrogram(c, fcfg) for c in chans]


MediaLike = Union[str, os.PathLike, AudioBuffer]


def load_media(media: MediaLike, cfg: PipelineConfig) -> AudioBuffer:
    from .mediaio import resample

    if isinstance(media, AudioBuffer):
        return resample(media, cfg.frontend.sample_rate)
    return extract_audio(media, cfg.frontend.sample_rate, ffmpeg=cfg.engine)


def prepare_pair(ref_media: MediaLike, coded_media: MediaLike, cfg: PipelineConfig):
    """Decode, resample and align; coded is conformed to the reference length."""
    ref = _staged("extract reference", load_media, ref_media, cfg)
    coded = _staged("extract coded", load_media, coded_media, cfg)
    if ref.channel_layout != coded.channel_layout:
        raise AudioVmafError(
            f"channel layout mismatch: reference is {ref.channel_layout}, coded is {coded.channel_layout}",
            stage="align",
        )
    aligned, report = _staged("align", time_align, ref, coded, cfg.max_lag_s)
    return ref, match_length(aligned, len(ref)), report


def audiovmaf_score(ref_media: MediaLike, coded_media: MediaLike, cfg: Optional[PipelineConfig] = None) -> VmafResult:
    """End-to-end score of ``coded_media`` against ``ref_media`` (0-100)."""
    cfg = (cfg or PipelineConfig()).validate()
    ref, coded, report = prepare_pair(ref_media, coded_media, cfg)
    ref_specs = _staged("frontend", signal_spectrograms, ref, cfg)
    coded_specs = _staged("frontend", signal_spectrograms, coded, cfg)
    result = score_spectrograms(ref_specs, coded_specs, cfg)
    result.alignment = {"lag_samples": report.lag_samples, "peak_correlation": report.peak_correlation}
    return result


def score_spectrograms(ref_specs, coded_specs, cfg: PipelineConfig) -> VmafResult:
    """Compose both spectrogram sets with the same settings and run VMAF."""
    if cfg.keep_intermediates:
        base = Path(cfg.workdir) if cfg.workdir else Path(tempfile.mkdtemp(prefix="audiovmaf-"))
        base.mkdir(parents=True, exist_ok=True)
        cleanup = None
    else:
        base = Path(tempfile.mkdtemp(prefix="audiovmaf-", dir=cfg.workdir))
        cleanup = base
    try:
        ref_path, coded_path = base / "reference.mkv", base / "coded.mkv"
        _staged("video", write_video, compose_stream(ref_specs, cfg.composer), ref_path, cfg.engine)
        _staged("video", write_video, compose_stream(coded_specs, cfg.composer), coded_path, cfg.engine)
        result = run_vmaf(ref_path, coded_path, ffmpeg=cfg.engine, model=cfg.model, n_threads=cfg.n_threads)
        if cleanup is None:
            result.artifacts = {"reference_video": str(ref_path), "coded_video": str(coded_path)}
        return result
    finally:
        if cleanup is not None:
            shutil.rmtree(cleanup, ignore_errors=True)


def _staged(stage, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except AudioVmafError as exc:
        if exc.stage in ("pipeline", "media-io", "frontend"):
            exc.stage = stage
        raise
    except (OSError, ValueError) as exc:
        raise AudioVmafError(str(exc), stage=stage) from exc


def replace_config(cfg: PipelineConfig, **composer_overrides) -> PipelineConfig:
    return dataclasses.replace(cfg, composer=dataclasses.replace(cfg.composer, **composer_overrides))
