import contextlib
import re
import subprocess

import numpy as np
import pytest

from audiovmaf import engine
from audiovmaf.errors import EngineNotFoundError

_ACCEPTANCE = []


def _has_libvmaf():
    try:
        exe = engine.find_ffmpeg()
    except EngineNotFoundError:
        return False
    out = subprocess.run([exe, "-hide_banner", "-filters"], capture_output=True, text=True).stdout
    return "libvmaf" in out


HAS_ENGINE = _has_libvmaf()
requires_engine = pytest.mark.skipif(not HAS_ENGINE, reason="ffmpeg with libvmaf not available")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


@contextlib.contextmanager
def criterion(log, name, detail=""):
    """Record a PASS/FAIL line for an acceptance criterion; re-raises failures."""
    info = {"detail": detail}
    try:
        yield info
    except BaseException as exc:
        log.append((name, "FAIL", f"{info['detail']} {type(exc).__name__}: {exc}".strip()))
        print(f"FAIL {name}: {info['detail']}")
        raise
    log.append((name, "PASS", info["detail"]))
    print(f"PASS {name}: {info['detail']}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    def key(entry):
        m = re.match(r"AC(\d+)", entry[0])
        return (int(m.group(1)) if m else 99, entry[0])

    for name, status, detail in sorted(_ACCEPTANCE, key=key):
        terminalreporter.write_line(f"{status:4s} {name}  {detail}")
