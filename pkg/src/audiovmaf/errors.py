"""Exception types raised across the pipeline."""


class AudioVmafError(Exception):
    """Base class. ``stage`` names the pipeline step that failed."""

    stage = "pipeline"

    def __init__(self, message, stage=None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage

    def __str__(self):
        return f"[{self.stage}] {self.args[0]}"


class ConfigError(AudioVmafError, ValueError):
    stage = "config"


class MediaError(AudioVmafError):
    stage = "media-io"


class NoAudioStreamError(MediaError):
    pass


class DecoderError(MediaError):
    pass


class SilentSignalError(MediaError, ValueError):
    pass


class FrontendError(AudioVmafError, ValueError):
    stage = "frontend"


class ComposerError(AudioVmafError, ValueError):
    stage = "composer"


class EngineError(AudioVmafError):
    stage = "vmaf"


class EngineNotFoundError(EngineError):
    pass


class ModelNotFoundError(EngineError):
    pass


class FrameCountMismatchError(EngineError, ValueError):
    pass


class ReportParseError(EngineError):
    pass


class VideoWriteError(EngineError):
    stage = "video"


class MetricError(AudioVmafError, ValueError):
    stage = "metrics1d"


class EvaluationError(AudioVmafError, ValueError):
    stage = "evaluation"
