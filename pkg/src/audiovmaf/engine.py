"""Locating and invoking the external ffmpeg binary (decoder, video writer, VMAF host)."""

import logging
import os
import shlex
import shutil
import subprocess

from .errors import EngineNotFoundError

log = logging.getLogger(__name__)

ENGINE_ENV = "AUDIOVMAF_FFMPEG"
MODEL_ENV = "AUDIOVMAF_VMAF_MODEL"


def find_ffmpeg(explicit=None):
    """Resolve the ffmpeg executable.

    Lookup order: ``explicit`` argument, ``$AUDIOVMAF_FFMPEG``, ``ffmpeg`` on
    ``PATH``, then the static build shipped with ``imageio-ffmpeg``.
    """
    for candidate in (explicit, os.environ.get(ENGINE_ENV)):
        if candidate:
            resolved = shutil.which(candidate) or (candidate if os.path.isfile(candidate) else None)
            if resolved is None:
                raise EngineNotFoundError(f"ffmpeg not found at {candidate!r}")
            return resolved
    on_path = shutil.which("ffmpeg")
    if on_path:
        return on_path
    try:
        import imageio_ffmpeg
    except ImportError:
        imageio_ffmpeg = None
    if imageio_ffmpeg is not None:
        try:
            return imageio_ffmpeg.get_ffmpeg_exe()
        except RuntimeError:
            pass
    raise EngineNotFoundError(
        f"no ffmpeg executable found; install ffmpeg with libvmaf or set ${ENGINE_ENV}"
    )


def run(args, *, input=None, stdout=subprocess.DEVNULL, check=True):
    """Run a command, logging the exact argument vector.

    Returns the CompletedProcess; stderr is always captured as text so callers
    can surface the tool's diagnostic.
    """
    log.info("exec: %s", shlex.join(str(a) for a in args))
    proc = subprocess.run(
        [str(a) for a in args], input=input, stdout=stdout, stderr=subprocess.PIPE
    )
    proc.stderr = proc.stderr.decode("utf-8", "replace")
    return proc


def ffmpeg_version(ffmpeg):
    proc = run([ffmpeg, "-hide_banner", "-version"], stdout=subprocess.PIPE)
    first = proc.stdout.decode("utf-8", "replace").splitlines()
    return first[0].split(" Copyright")[0].strip() if first else "unknown"


def tail(text, n=6):
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    return "\n".join(lines[-n:])
