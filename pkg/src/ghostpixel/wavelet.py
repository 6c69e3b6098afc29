"""Multi-level 2D orthonormal Haar transform and soft thresholding.

Analysis filters are (1/sqrt 2)[1, 1] and (1/sqrt 2)[1, -1], non-redundant
with stride 2, applied recursively to the approximation band.  The
orthonormal normalization makes the transform Parseval-tight, so threshold
levels act directly on pixel-scale amplitudes.
"""

from dataclasses import dataclass

import numpy as np

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class WaveletPyramid:
    """L-level Haar decomposition of an n x n image.

    details[l] holds the (horizontal, vertical, diagonal) triple of level
    l + 1, finest first: details[0] has shape (n/2, n/2), details[L-1]
    has shape (n/2^L, n/2^L), matching `approx`.
    """

    approx: np.ndarray
    details: tuple  # of (h, v, d) triples, finest first

    @property
    def levels(self) -> int:
        return len(self.details)

    @property
    def side(self) -> int:
        return self.approx.shape[0] << self.levels

    def coefficient_vector(self) -> np.ndarray:
        """All coefficients flattened; length equals side^2."""
        parts = [self.approx.ravel()]
        for h, v, d in self.details:
            parts += [h.ravel(), v.ravel(), d.ravel()]
        return np.concatenate(parts)


def _analyze_once(x):
    lo = (x[:, 0::2] + x[:, 1::2]) / _SQRT2
    hi = (x[:, 0::2] - x[:, 1::2]) / _SQRT2
    ll = (lo[0::2] + lo[1::2]) / _SQRT2
    v = (lo[0::2] - lo[1::2]) / _SQRT2
    h = (hi[0::2] + hi[1::2]) / _SQRT2
    d = (hi[0::2] - hi[1::2]) / _SQRT2
    return ll, (h, v, d)


def _synthesize_once(ll, hvd):
    h, v, d = hvd
    m = ll.shape[0]
    lo = np.empty((2 * m, m))
    hi = np.empty((2 * m, m))
    lo[0::2] = (ll + v) / _SQRT2
    lo[1::2] = (ll - v) / _SQRT2
    hi[0::2] = (h + d) / _SQRT2
    hi[1::2] = (h - d) / _SQRT2
    x = np.empty((2 * m, 2 * m))
    x[:, 0::2] = (lo + hi) / _SQRT2
    x[:, 1::2] = (lo - hi) / _SQRT2
    return x


def dwt2(image: np.ndarray, levels: int) -> WaveletPyramid:
    """Orthonormal Haar analysis of a square image, `levels` >= 1 deep."""
    x = np.asarray(image, dtype=np.float64)
    n = x.shape[0]
    if x.ndim != 2 or x.shape[1] != n:
        raise ValueError(f"expected a square image, got shape {x.shape}")
    if levels < 1 or n % (1 << levels):
        raise ValueError(f"side {n} is not divisible by 2^{levels}")
    details = []
    for _ in range(levels):
        x, hvd = _analyze_once(x)
        details.append(hvd)
    return WaveletPyramid(x, tuple(details))


def idwt2(pyramid: WaveletPyramid) -> np.ndarray:
    """Exact inverse of dwt2 (perfect reconstruction to float precision)."""
    x = np.asarray(pyramid.approx, dtype=np.float64)
    for hvd in reversed(pyramid.details):
        if hvd[0].shape != x.shape:
            raise ValueError(f"detail shape {hvd[0].shape} does not match approx shape {x.shape}")
        x = _synthesize_once(x, hvd)
    return x


def soft_threshold(pyramid: WaveletPyramid, lam: float) -> WaveletPyramid:
    """Shrink detail coefficients c -> sign(c) * max(|c| - lam, 0).

    The approximation band is left untouched; lam must be >= 0.
    """
    if lam < 0:
        raise ValueError(f"threshold {lam} is negative")
    shrunk = tuple(
        tuple(np.sign(c) * np.maximum(np.abs(c) - lam, 0.0) for c in hvd)
        for hvd in pyramid.details
    )
    return WaveletPyramid(pyramid.approx, shrunk)
