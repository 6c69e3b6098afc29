"""Image-quality metrics: CNR, modulation depth, MSE/PSNR/correlation, and
knife-edge resolution.

CNR follows the contrast-to-noise convention for binary objects: the mean
separation of the transmitting (label 1) and blocking (label 0) regions,
divided by the pooled standard deviation sqrt(var1 + var0).  Variances are
population variances (<G^2> - <G>^2), so a constant region contributes 0.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

# Gaussian FWHM = 2 sqrt(2 ln 2) sigma; fixed at 4+1 digits so file-level
# oracles and the optics geometry share one literal.
FWHM_PER_SIGMA = 2.3548


class DegenerateImageError(ValueError):
    """Raised when a metric is undefined on (near-)constant input."""


@dataclass(frozen=True)
class RegionMask:
    """Per-pixel labels: 1 = transmitting region, 0 = blocking, -1 = ignored."""

    labels: np.ndarray

    @classmethod
    def from_image(cls, image, hi: float = 0.75, lo: float = 0.25) -> "RegionMask":
        """Label pixels >= hi as 1 and <= lo as 0; anything between is ignored."""
        img = np.asarray(image, dtype=np.float64)
        labels = np.full(img.shape, -1, dtype=np.int8)
        labels[img >= hi] = 1
        labels[img <= lo] = 0
        return cls(labels)


def cnr(image: np.ndarray, regions: RegionMask) -> float:
    """Contrast-to-noise ratio (<G1> - <G0>) / sqrt(var1 + var0).

    Both regions need at least 2 pixels.  A zero pooled variance raises
    DegenerateImageError: it signals a constant image, not infinite quality.
    """
    img = np.asarray(image, dtype=np.float64)
    g1 = img[regions.labels == 1]
    g0 = img[regions.labels == 0]
    if len(g1) < 2 or len(g0) < 2:
        raise ValueError(f"need >= 2 pixels per region, got {len(g1)} and {len(g0)}")
    var1 = np.mean(g1**2) - np.mean(g1) ** 2
    var0 = np.mean(g0**2) - np.mean(g0) ** 2
    denom = math.sqrt(max(var1 + var0, 0.0))
    if denom == 0.0:
        raise DegenerateImageError("zero variance in both regions")
    return float((np.mean(g1) - np.mean(g0)) / denom)


def modulation_depth(profile: np.ndarray) -> float:
    """Modulation depth ratio (max - min) / max of an intensity profile."""
    p = np.asarray(profile, dtype=np.float64)
    top = p.max()
    if top <= 0:
        raise ValueError(f"profile maximum {top} is not positive")
    return float((top - p.min()) / top)


def _gaussian(x, amp, center, sigma):
    return amp * np.exp(-0.5 * ((x - center) / sigma) ** 2)


def _crossing(q, level):
    """First sub-sample position where the normalized profile crosses level."""
    above = q >= level
    idx = np.argmax(above)
    if not above.any() or idx == 0:
        return 0.0 if q[0] >= level else None
    lo, hi = q[idx - 1], q[idx]
    return idx - 1 + (level - lo) / (hi - lo)


def knife_edge_fwhm(edge_profile: np.ndarray, pitch: float) -> float:
    """Blur FWHM in micrometers recovered from an edge-spread function.

    Differentiates the profile (central differences), then least-squares
    fits a Gaussian to the derivative; the fit is seeded with the 10-90%
    rise width divided by 1.083.  An unblurred step collapses to the
    quantization floor (at most 2 * pitch).
    """
    p = np.asarray(edge_profile, dtype=np.float64)
    if len(p) < 4:
        raise ValueError("edge profile too short")
    if p.max() == p.min():
        raise ValueError("no edge found: profile is constant")
    q = (p - p.min()) / (p.max() - p.min())
    if q[: len(q) // 2].mean() > q[len(q) // 2 :].mean():
        q = q[::-1]  # analyze as a rising edge
    x10, x90 = _crossing(q, 0.1), _crossing(q, 0.9)
    if x10 is None or x90 is None or x90 <= x10:
        raise ValueError("no valid 10%-90% edge transition found")
    if x90 - x10 <= 1.0:
        # sub-sample transition: the derivative is a bare spike and the fit
        # is degenerate, so report the one-sample quantization floor
        return float(pitch)

    lsf = np.gradient(q)
    x = np.arange(len(q), dtype=np.float64)
    sigma0 = max((x90 - x10) / 1.083 / FWHM_PER_SIGMA, 0.2)
    p0 = (max(lsf.max(), 1e-6), 0.5 * (x10 + x90), sigma0)
    bounds = ([0.0, 0.0, 0.05], [np.inf, len(q) - 1.0, len(q)])
    try:
        popt, _ = curve_fit(_gaussian, x, lsf, p0=p0, bounds=bounds, maxfev=10000)
    except RuntimeError as exc:
        raise ValueError(f"Gaussian fit to edge derivative failed: {exc}") from exc
    return float(FWHM_PER_SIGMA * popt[2] * pitch)


def mse_psnr_ncorr(a: np.ndarray, b: np.ndarray):
    """(MSE, PSNR, Pearson correlation) between two equally shaped images.

    PSNR assumes both inputs live on a [0, 1] scale (peak = 1) and is
    reported as +inf when the images are identical.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    psnr = math.inf if mse == 0.0 else float(10.0 * math.log10(1.0 / mse))
    sx = x.std()
    sy = y.std()
    if sx == 0.0 or sy == 0.0:
        raise DegenerateImageError("correlation undefined for constant input")
    ncorr = float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))
    return mse, psnr, ncorr
