"""Turn calibrated spectrograms into 480x640 RGB video frames.

Each frame shows the most recent ``columns_per_frame`` spectrogram columns of
every signal (L, R, M top to bottom for stereo), with the highest band in the
top row of each strip. The stacked tile is repeated to fill the image, levels
are quantised over a fixed dB window and mapped through a 256-entry colormap.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .config import ComposerConfig
from .errors import ComposerError
from .frontend import ErbSpectrogram


@dataclass
class ComposedFrame:
    pixels: np.ndarray  # (height, width, 3) uint8
    frame_index: int


def _check_specs(specs: Sequence[ErbSpectrogram]):
    if not specs:
        raise ComposerError("no spectrograms to compose")
    shape = specs[0].levels.shape
    for s in specs[1:]:
        if s.levels.shape != shape:
            raise ComposerError("channel spectrograms differ in shape")
    return shape


def stacked_levels(specs: Sequence[ErbSpectrogram]) -> np.ndarray:
    """All signals stacked, highest band first: ``[n_signals * bands, columns]``."""
    _check_specs(specs)
    return np.concatenate([s.levels[::-1] for s in specs], axis=0)


def assemble_tile(specs: Sequence[ErbSpectrogram], t: int, columns_per_frame: int = 32) -> np.ndarray:
    """Level tile for frame ``t``: columns ``t-31 .. t``, zero-filled before column 0."""
    _, ncol = _check_specs(specs)
    if t < 0 or t >= ncol:
        raise ComposerError(f"frame out of range: {t} not in [0, {ncol})")
    stacked = stacked_levels(specs)
    tile = np.zeros((stacked.shape[0], columns_per_frame))
    first = t - columns_per_frame + 1
    src = stacked[:, max(first, 0): t + 1]
    tile[:, columns_per_frame - src.shape[1]:] = src
    return tile


def replicate(tile: np.ndarray, cfg: ComposerConfig = ComposerConfig()) -> np.ndarray:
    th, tw = tile.shape
    if cfg.image_height % th or cfg.image_width % tw:
        raise ComposerError(f"tile does not tile image: [{th}x{tw}] into [{cfg.image_height}x{cfg.image_width}]")
    if cfg.replication:
        return np.tile(tile, (cfg.image_height // th, cfg.image_width // tw))
    out = np.zeros((cfg.image_height, cfg.image_width), dtype=tile.dtype)
    out[:th, :tw] = tile
    return out


def quantize_db(levels, cfg: ComposerConfig = ComposerConfig()) -> np.ndarray:
    """Map dB SPL to uint8 indices over ``[db_ceiling - range, db_ceiling]``; 0 dB (gated) -> 0."""
    levels = np.asarray(levels, dtype=np.float64)
    floor_db = cfg.db_ceiling - cfg.dynamic_range_db
    # round half up: 127.5 -> 128
    idx = np.floor(255.0 * (levels - floor_db) / cfg.dynamic_range_db + 0.5)
    idx = np.clip(idx, 0, 255)
    idx[levels == 0.0] = 0
    return idx.astype(np.uint8)


@lru_cache(maxsize=None)
def _lut(name: str) -> np.ndarray:
    if name == "hsv":
        rows = [colorsys.hsv_to_rgb(i / 256.0, 1.0, 1.0) for i in range(256)]
        lut = np.floor(np.asarray(rows) * 255.0 + 0.5).astype(np.uint8)
    elif name == "grayscale":
        lut = np.repeat(np.arange(256, dtype=np.uint8)[:, None], 3, axis=1)
    else:
        raise ComposerError(f"unknown colormap {name!r}")
    lut.setflags(write=False)
    return lut


def hsv_lut() -> np.ndarray:
    """256x3 uint8 table: hue i/256 at full saturation and value."""
    return _lut("hsv").copy()


def colormap_lut(name: str) -> np.ndarray:
    return _lut(name).copy()


def compose_frame(specs: Sequence[ErbSpectrogram], t: int, cfg: ComposerConfig = ComposerConfig()) -> ComposedFrame:
    tile = assemble_tile(specs, t, cfg.columns_per_frame)
    idx = quantize_db(replicate(tile, cfg), cfg)
    return ComposedFrame(_lut(cfg.colormap)[idx], t)


def compose_stream(specs: Sequence[ErbSpectrogram], cfg: ComposerConfig = ComposerConfig()) -> Iterator[ComposedFrame]:
    """Yield one frame per spectrogram column, in order.

    Equivalent to :func:`compose_frame` for each ``t`` but quantises the whole
    stack once up front.
    """
    cfg.validate()
    stacked = stacked_levels(specs)
    th, ncol = stacked.shape
    tw = cfg.columns_per_frame
    if cfg.image_height % th or cfg.image_width % tw:
        raise ComposerError(f"tile does not tile image: [{th}x{tw}] into [{cfg.image_height}x{cfg.image_width}]")
    padded = np.zeros((th, ncol + tw - 1), dtype=np.uint8)
    padded[:, tw - 1:] = quantize_db(stacked, cfg)
    lut = _lut(cfg.colormap)
    canvas = np.zeros((cfg.image_height, cfg.image_width), dtype=np.uint8)
    for t in range(ncol):
        tile = padded[:, t: t + tw]
        if cfg.replication:
            idx = np.tile(tile, (cfg.image_height // th, cfg.image_width // tw))
        else:
            canvas[:th, :tw] = tile
            idx = canvas
        yield ComposedFrame(lut[idx], t)


def frame_count(specs: Sequence[ErbSpectrogram]) -> int:
    return _check_specs(specs)[1]


def save_png(frame: ComposedFrame, path) -> None:
    from PIL import Image

    Image.fromarray(frame.pixels).save(path, format="PNG")
