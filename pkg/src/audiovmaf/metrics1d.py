"""Waveform-domain (1D) versions of SSIM, MS-SSIM, VIFP, GMSM and GMSD.

Local statistics use sliding 1D windows over the time-domain signal with the
constants of the usual 2D image definitions. Stereo input should be reduced to
the mid signal first (:func:`audiovmaf.mediaio.downmix_mid`).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .config import Metric1dConfig
from .errors import MetricError

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
GMSD_SCALED_FLOOR = 0.687
# GMS lies in (0, 1], so its population std is at most 0.5
GMSD_RAW_MAX = 0.5
_VIF_EPS = 1e-10
# full scale of the 8-bit pixel range that vif_noise_var is defined against
_VIF_PIXEL_RANGE = 255.0


@dataclass
class Metric1dReport:
    ssim: float
    ms_ssim: float
    vifp: float
    gmsm: float
    gmsd_raw: float
    gmsd_paper_scaled: float

    def to_dict(self):
        return asdict(self)


def gaussian_window(length: int, sigma: float) -> np.ndarray:
    n = np.arange(length) - (length - 1) / 2.0
    w = np.exp(-(n * n) / (2.0 * sigma * sigma))
    return w / w.sum()


def local_moments(x, y, window):
    """Weighted local means, variances and covariance over every full window position.

    Returns ``(mu_x, mu_y, var_x, var_y, cov_xy)``, each of length
    ``len(x) - len(window) + 1``.
    """
    w = np.asarray(window, dtype=np.float64)[::-1]

    def filt(s):
        return np.convolve(s, w, mode="valid")

    mu_x, mu_y = filt(x), filt(y)
    var_x = filt(x * x) - mu_x * mu_x
    var_y = filt(y * y) - mu_y * mu_y
    cov = filt(x * y) - mu_x * mu_y
    return mu_x, mu_y, var_x, var_y, cov


def _pair(ref, deg, min_len):
    x = np.asarray(ref, dtype=np.float64)
    y = np.asarray(deg, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise MetricError("1D metrics take single-channel signals")
    if len(x) != len(y):
        raise MetricError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < min_len:
        raise MetricError(f"too short: need at least {min_len} samples, got {len(x)}")
    return x, y


def _ssim_terms(x, y, cfg: Metric1dConfig):
    """Per-window luminance and contrast-structure maps."""
    c1, c2 = cfg.c1, cfg.c2
    mu_x, mu_y, vx, vy, cxy = local_moments(x, y, gaussian_window(cfg.window_len, cfg.sigma))
    lum = (2 * mu_x * mu_y + c1) / (mu_x ** 2 + mu_y ** 2 + c1)
    cs = (2 * cxy + c2) / (vx + vy + c2)
    return lum, cs


def ssim_1d(ref, deg, cfg: Metric1dConfig = Metric1dConfig()) -> float:
    x, y = _pair(ref, deg, cfg.window_len)
    lum, cs = _ssim_terms(x, y, cfg)
    return float(np.mean(lum * cs))


def _halve(s):
    n = len(s) - len(s) % 2
    return 0.5 * (s[0:n:2] + s[1:n:2])


def ms_ssim_1d(ref, deg, cfg: Metric1dConfig = Metric1dConfig()) -> float:
    """Multi-scale SSIM: contrast-structure at the finer scales, full SSIM at the coarsest."""
    scales = cfg.ms_ssim_scales
    weights = MS_SSIM_WEIGHTS[:scales]
    x, y = _pair(ref, deg, cfg.window_len * 2 ** (scales - 1))
    score = 1.0
    for s in range(scales):
        lum, cs = _ssim_terms(x, y, cfg)
        if s == scales - 1:
            term = np.mean(lum * cs)
        else:
            term = np.mean(cs)
        # negative structure correlation would make the fractional power undefined
        score *= max(float(term), 0.0) ** weights[s]
        x, y = _halve(x), _halve(y)
    return float(score)


def _vif_window(scale: int, n_scales: int):
    n = 2 ** (n_scales - scale + 1) + 1
    return gaussian_window(n, n / 5.0)


def vifp_1d(ref, deg, cfg: Metric1dConfig = Metric1dConfig()) -> float:
    """Pixel-domain VIF over ``cfg.vif_scales`` dyadic scales (reference-conditioned).

    The noise variance ``cfg.vif_noise_var`` is defined for 8-bit pixel
    values, so both signals are first rescaled from ``cfg.dynamic_range`` to
    a 255 full scale, the same way the SSIM constants scale with ``L``.
    Without this the noise term dominates audio-range variances and
    estimation noise in ``g`` pushes the score above 1.
    """
    n_scales = cfg.vif_scales
    x, y = _pair(ref, deg, cfg.window_len * 2 ** (cfg.ms_ssim_scales - 1))
    gain = _VIF_PIXEL_RANGE / cfg.dynamic_range
    x, y = x * gain, y * gain
    sn2 = cfg.vif_noise_var
    num = den = 0.0
    for scale in range(1, n_scales + 1):
        win = _vif_window(scale, n_scales)
        if scale > 1:
            x = np.convolve(x, win[::-1], mode="valid")[::2]
            y = np.convolve(y, win[::-1], mode="valid")[::2]
        if len(x) < len(win):
            raise MetricError("too short for the requested number of VIF scales")
        _, _, vx, vy, cxy = local_moments(x, y, win)
        vx = np.maximum(vx, 0.0)
        vy = np.maximum(vy, 0.0)
        g = cxy / (vx + _VIF_EPS)
        sv2 = vy - g * cxy

        flat_x = vx < _VIF_EPS
        g[flat_x] = 0.0
        sv2[flat_x] = vy[flat_x]
        vx[flat_x] = 0.0
        flat_y = vy < _VIF_EPS
        g[flat_y] = 0.0
        sv2[flat_y] = 0.0
        neg = g < 0
        sv2[neg] = vy[neg]
        g[neg] = 0.0
        sv2 = np.maximum(sv2, _VIF_EPS)

        num += np.sum(np.log2(1.0 + g * g * vx / (sv2 + sn2)))
        den += np.sum(np.log2(1.0 + vx / sn2))
    if den <= 0.0:
        raise MetricError("degenerate reference: zero variance everywhere")
    return float(num / den)


def gms_1d(ref, deg, cfg: Metric1dConfig = Metric1dConfig()):
    """Gradient magnitude similarity map statistics.

    Returns
    -------
    gmsm : float
        Mean similarity, 1 for identical gradient magnitudes.
    gmsd_raw : float
        Population standard deviation of the similarity map, 0 when identical.
    gmsd_scaled : float
        ``1 - gmsd_raw * (1 - 0.687) / 0.5``, an affine map of the raw
        deviation's full range onto ``[0.687, 1]`` (1 = identical).
    """
    x, y = _pair(ref, deg, 3)
    kernel = np.array([1.0, 0.0, -1.0]) / 2.0
    gx = np.abs(np.convolve(x, kernel, mode="valid"))
    gy = np.abs(np.convolve(y, kernel, mode="valid"))
    c = cfg.gms_c
    gms = (2.0 * gx * gy + c) / (gx * gx + gy * gy + c)
    gmsm = float(np.mean(gms))
    gmsd = float(np.std(gms))
    scaled = 1.0 - gmsd * (1.0 - GMSD_SCALED_FLOOR) / GMSD_RAW_MAX
    return gmsm, gmsd, scaled


def metrics_report(ref, deg, cfg: Metric1dConfig = Metric1dConfig()) -> Metric1dReport:
    gmsm, gmsd, scaled = gms_1d(ref, deg, cfg)
    return Metric1dReport(
        ssim=ssim_1d(ref, deg, cfg),
        ms_ssim=ms_ssim_1d(ref, deg, cfg),
        vifp=vifp_1d(ref, deg, cfg),
        gmsm=gmsm,
        gmsd_raw=gmsd,
        gmsd_paper_scaled=scaled,
    )
