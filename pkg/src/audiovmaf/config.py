"""Configuration objects and the single defaults layer.

Every tunable lives in one of the dataclasses below. ``PRESETS`` maps a preset
name to a fully resolved :class:`PipelineConfig`; ``"paper-default"`` is the
published operating point. Overrides come from an INI-style file (one section
per dataclass) or from keyword overrides, and are validated before any work.

Config file format::

    [frontend]
    num_bands = 80
    window_len = 2048

    [composer]
    replication = off
    colormap = grayscale

    [alignment]
    max_lag_s = 0.25

    [vmaf]
    engine = /usr/local/bin/ffmpeg
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError


@dataclass(frozen=True)
class CalibrationParams:
    dbfs_ref: float = -25.0
    spl_ref: float = 85.0


@dataclass(frozen=True)
class FrontendConfig:
    num_bands: int = 80
    f_min: float = 30.0
    f_max: float = 18000.0
    sample_rate: int = 48000
    window_len: int = 2048
    hop: int = 1600
    fps: int = 30
    calibration: CalibrationParams = field(default_factory=CalibrationParams)

    def validate(self):
        if self.num_bands < 1:
            raise ConfigError("num_bands must be positive")
        if self.hop * self.fps != self.sample_rate:
            raise ConfigError(
                f"hop*fps must equal sample_rate ({self.hop}*{self.fps} != {self.sample_rate})"
            )
        if not 0 < self.f_min < self.f_max <= self.sample_rate / 2:
            raise ConfigError("need 0 < f_min < f_max <= sample_rate/2")
        if self.window_len < 2 or self.hop < 1:
            raise ConfigError("window_len and hop must be positive")
        return self

    @property
    def column_period(self) -> float:
        return self.hop / self.sample_rate


@dataclass(frozen=True)
class ComposerConfig:
    columns_per_frame: int = 32
    image_height: int = 480
    image_width: int = 640
    dynamic_range_db: float = 70.0
    replication: bool = True
    colormap: str = "hsv"
    db_ceiling: float = 110.0

    def validate(self):
        if self.dynamic_range_db <= 0:
            raise ConfigError("dynamic_range_db must be > 0")
        if self.colormap not in ("hsv", "grayscale"):
            raise ConfigError(f"unknown colormap {self.colormap!r} (hsv|grayscale)")
        if self.columns_per_frame < 1:
            raise ConfigError("columns_per_frame must be >= 1")
        if self.image_width % self.columns_per_frame:
            raise ConfigError("image_width must be a multiple of columns_per_frame")
        return self


@dataclass(frozen=True)
class Metric1dConfig:
    window_len: int = 11
    sigma: float = 1.5
    dynamic_range: float = 2.0
    ms_ssim_scales: int = 5
    vif_scales: int = 4
    k1: float = 0.01
    k2: float = 0.03
    vif_noise_var: float = 2.0
    gms_c: float = 0.0026

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2

    def validate(self):
        if self.window_len < 1 or self.ms_ssim_scales < 1 or self.vif_scales < 1:
            raise ConfigError("window_len and scale counts must be >= 1")
        if self.sigma <= 0:
            raise ConfigError("sigma must be > 0")
        return self


@dataclass(frozen=True)
class PipelineConfig:
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    composer: ComposerConfig = field(default_factory=ComposerConfig)
    metrics1d: Metric1dConfig = field(default_factory=Metric1dConfig)
    max_lag_s: float = 0.25
    engine: Optional[str] = None
    model: Optional[str] = None
    n_threads: int = 0
    keep_intermediates: bool = False
    workdir: Optional[str] = None

    def validate(self):
        self.frontend.validate()
        self.composer.validate()
        self.metrics1d.validate()
        if self.max_lag_s < 0:
            raise ConfigError("max_lag_s must be >= 0")
        n_signals = 3
        if self.composer.image_height % self.frontend.num_bands:
            raise ConfigError("image_height must be a multiple of num_bands")
        if self.composer.replication and self.composer.image_height % (n_signals * self.frontend.num_bands):
            raise ConfigError("stereo tile height does not divide image_height")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


PRESETS = {"paper-default": PipelineConfig()}

# section name -> (attribute on PipelineConfig or None for top level, dataclass)
_SECTIONS = {
    "frontend": ("frontend", FrontendConfig),
    "calibration": ("frontend.calibration", CalibrationParams),
    "composer": ("composer", ComposerConfig),
    "metrics1d": ("metrics1d", Metric1dConfig),
    "alignment": (None, PipelineConfig),
    "vmaf": (None, PipelineConfig),
}
# top-level sections share PipelineConfig, so restrict which keys each accepts
_SECTION_KEYS = {
    "alignment": {"max_lag_s"},
    "vmaf": {"engine", "model", "n_threads", "keep_intermediates", "workdir"},
}


def _coerce(cls, name: str, raw: Any):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    if name not in fields:
        raise ConfigError(f"unknown key {name!r} for {cls.__name__}")
    default = getattr(cls(), name)
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if isinstance(default, bool):
        lowered = text.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}") from None
    if isinstance(default, float):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {raw!r}") from None
    return text or None


def _replace_path(cfg, dotted: Optional[str], updates: dict):
    if not updates:
        return cfg
    if dotted is None:
        return dataclasses.replace(cfg, **updates)
    head, _, rest = dotted.partition(".")
    inner = getattr(cfg, head)
    return dataclasses.replace(cfg, **{head: _replace_path(inner, rest or None, updates)})


def apply_overrides(cfg: PipelineConfig, overrides: dict) -> PipelineConfig:
    """Apply ``{section: {key: value}}`` overrides and validate the result."""
    for section, values in overrides.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        dotted, cls = _SECTIONS[section]
        allowed = _SECTION_KEYS.get(section)
        if allowed is not None and not set(values) <= allowed:
            raise ConfigError(f"unknown key(s) {sorted(set(values) - allowed)} in [{section}]")
        updates = {k: _coerce(cls, k, v) for k, v in values.items()}
        cfg = _replace_path(cfg, dotted, updates)
    return cfg.validate()


def load_config(path=None, preset: str = "paper-default", overrides: Optional[dict] = None) -> PipelineConfig:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; available: {', '.join(PRESETS)}")
    cfg = PRESETS[preset]
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from exc
        cfg = apply_overrides(cfg, {s: dict(parser.items(s)) for s in parser.sections()})
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg.validate()


def write_config(cfg: PipelineConfig, path) -> None:
    """Write ``cfg`` in the format :func:`load_config` reads."""
    parser = configparser.ConfigParser()
    d = cfg.to_dict()
    cal = d["frontend"].pop("calibration")
    parser["frontend"] = {k: str(v) for k, v in d["frontend"].items()}
    parser["calibration"] = {k: str(v) for k, v in cal.items()}
    parser["composer"] = {k: str(v) for k, v in d["composer"].items()}
    parser["metrics1d"] = {k: str(v) for k, v in d["metrics1d"].items()}
    parser["alignment"] = {"max_lag_s": str(d["max_lag_s"])}
    parser["vmaf"] = {
        k: "" if d[k] is None else str(d[k])
        for k in ("engine", "model", "n_threads", "keep_intermediates", "workdir")
    }
    with open(Path(path), "w", encoding="utf-8") as fh:
        parser.write(fh)
