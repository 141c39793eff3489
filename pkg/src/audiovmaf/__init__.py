"""Coded-audio quality from perceptual spectrogram videos scored by VMAF."""

__version__ = "0.1.0"

from .config import (  # noqa: E402
    CalibrationParams,
    ComposerConfig,
    FrontendConfig,
    Metric1dConfig,
    PipelineConfig,
    load_config,
)
from .errors import AudioVmafError  # noqa: E402
from .mediaio import AudioBuffer, downmix_mid, extract_audio, time_align  # noqa: E402
from .vmaf import VmafResult, audiovmaf_score, run_vmaf  # noqa: E402

__all__ = [
    "AudioBuffer",
    "AudioVmafError",
    "CalibrationParams",
    "ComposerConfig",
    "FrontendConfig",
    "Metric1dConfig",
    "PipelineConfig",
    "VmafResult",
    "audiovmaf_score",
    "downmix_mid",
    "extract_audio",
    "load_config",
    "run_vmaf",
    "time_align",
]
