"""Forward model of the single-pixel acquisition chain.

An exposure projects one modulation pattern onto the object and integrates
the transmitted intensity on a bucket detector.  Real masks are imperfect:
opaque pixels leak (finite modulation depth), etched edges slope (modeled
as Gaussian edge blur), the stage jitters (integer-pixel shifts), and the
finite source size adds penumbral blur.  The detector adds shot noise,
read noise, and a dark offset.

All randomness flows through counter-based Philox streams keyed by
(seed, exposure index), so acquisitions replay bit-for-bit regardless of
evaluation order or thread count.  Convolutions zero-pad at the image
boundary; oracles in the tests assume the same convention.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .hadamard import HadamardBasis, make_pattern_pair
from .metrics import FWHM_PER_SIGMA

# Philox sub-stream tags; one key space per purpose, never mixed.
_TAG_BUCKET = 0
_TAG_JITTER = 1
_TAG_SPECKLE = 2


def exposure_rng(seed: int, index: int, tag: int = _TAG_BUCKET) -> np.random.Generator:
    """Independent, replayable random stream for one exposure."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, index & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    counter = np.array([0, 0, 0, tag], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


@dataclass(frozen=True)
class ImperfectionModel:
    """Mask imperfections: leakage, sloped edges, stage jitter.

    modulation_depth is the fraction of intensity an opaque pixel removes
    (1.0 = ideal mask); sigmas are in pattern-pixel units.
    """

    modulation_depth: float = 1.0
    edge_blur_sigma: float = 0.0
    jitter_sigma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.modulation_depth <= 1.0:
            raise ValueError(f"modulation_depth {self.modulation_depth} outside [0, 1]")
        if self.edge_blur_sigma < 0 or self.jitter_sigma < 0:
            raise ValueError("blur/jitter sigma must be >= 0")

    @property
    def ideal(self) -> bool:
        return self.modulation_depth == 1.0 and self.edge_blur_sigma == 0.0 and self.jitter_sigma == 0.0


@dataclass(frozen=True)
class SourceModel:
    """Finite incoherent source and projection geometry.

    source_fwhm is (axis0, axis1) in micrometers; distances in millimeters.
    """

    source_fwhm: tuple
    source_to_mask: float
    mask_to_object: float

    def __post_init__(self):
        if min(self.source_fwhm) <= 0 or self.source_to_mask <= 0 or self.mask_to_object <= 0:
            raise ValueError("source FWHM and distances must be positive")

    def fwhm_pixels(self, pixel_pitch: float) -> tuple:
        """Penumbral blur FWHM per axis in object-plane pixels."""
        ratio = self.mask_to_object / self.source_to_mask
        return tuple(f * ratio / pixel_pitch for f in self.source_fwhm)


@dataclass(frozen=True)
class NoiseModel:
    """Bucket detector noise: Poisson shot noise, Gaussian read noise, dark offset.

    photon_scale is the expected photon count for a unit-intensity bucket;
    0 disables shot noise.  Poisson counts are divided back by photon_scale
    so bucket units stay comparable across noise levels.
    """

    photon_scale: float = 0.0
    read_noise_sigma: float = 0.0
    dark_current: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.photon_scale < 0 or self.read_noise_sigma < 0:
            raise ValueError("photon_scale and read_noise_sigma must be >= 0")


@dataclass(frozen=True)
class Phantom:
    """Object transmission map in [0, 1] on a square pixel grid."""

    transmission: np.ndarray
    pixel_pitch: float = 1.0  # micrometers per pixel

    def __post_init__(self):
        t = np.asarray(self.transmission, dtype=np.float64)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValueError(f"transmission must be square 2D, got {t.shape}")
        if t.min() < 0.0 or t.max() > 1.0:
            raise ValueError("transmission values outside [0, 1]")
        if self.pixel_pitch <= 0:
            raise ValueError("pixel_pitch must be positive")
        object.__setattr__(self, "transmission", t)

    @property
    def side(self) -> int:
        return self.transmission.shape[0]


@dataclass(frozen=True)
class MeasurementSeries:
    """Ordered bucket records plus everything needed to replay them.

    indices[t] is the pattern identity of record t: a raw Hadamard row
    index, or the speckle pattern number.  bucket_minus is None unless the
    acquisition was differential.
    """

    n: int
    modulation: str  # "hadamard" | "speckle"
    differential: bool
    indices: np.ndarray
    bucket_plus: np.ndarray
    bucket_minus: np.ndarray | None
    imperfection: ImperfectionModel
    source: SourceModel | None
    noise: NoiseModel
    pixel_pitch: float
    basis_k: int = 0
    ordering: str = "natural"
    speckle_size_px: int = 1

    @property
    def seed(self) -> int:
        return self.noise.seed

    def __len__(self):
        return len(self.indices)


def gaussian_blur(image: np.ndarray, sigma) -> np.ndarray:
    """Separable Gaussian blur, kernel truncated at +-3 sigma and
    renormalized, zero padding at the boundary.

    sigma may be a scalar or a per-axis (sigma0, sigma1) pair; a sigma
    whose 3-sigma radius rounds below one pixel leaves that axis alone.
    """
    s0, s1 = (sigma, sigma) if np.isscalar(sigma) else sigma
    out = np.asarray(image, dtype=np.float64)
    for axis, s in ((0, s0), (1, s1)):
        radius = int(np.floor(3.0 * s)) if s > 0 else 0
        if radius < 1:
            continue
        x = np.arange(-radius, radius + 1, dtype=np.float64)
        kernel = np.exp(-0.5 * (x / s) ** 2)
        kernel /= kernel.sum()
        out = correlate1d(out, kernel, axis=axis, mode="constant", cval=0.0)
    return out


def render_mask(pattern: np.ndarray, imp: ImperfectionModel) -> np.ndarray:
    """Transmitted-intensity map of a binary mask pattern.

    Opaque pixels (0) leak 1 - modulation_depth, open pixels (1) pass 1.0;
    the map is then edge-blurred.  Away from the zero-padded boundary the
    output stays within [1 - modulation_depth, 1].
    """
    p = np.asarray(pattern)
    if not np.isin(p, (0, 1)).all():
        raise ValueError("render_mask expects a binary pattern")
    return render_intensity(p.astype(np.float64), imp)


def render_intensity(pattern: np.ndarray, imp: ImperfectionModel) -> np.ndarray:
    """render_mask for gray patterns in [0, 1] (used for speckle masks)."""
    gray = (1.0 - imp.modulation_depth) + imp.modulation_depth * np.asarray(pattern, dtype=np.float64)
    if imp.edge_blur_sigma > 0:
        gray = gaussian_blur(gray, imp.edge_blur_sigma)
    return gray


def source_blur(image: np.ndarray, src: SourceModel, pixel_pitch: float) -> np.ndarray:
    """Penumbral blur of an extended incoherent source.

    Blur FWHM per axis in pixels is source_fwhm * (mask_to_object /
    source_to_mask) / pixel_pitch, converted to sigma via FWHM/2.3548.
    """
    if pixel_pitch <= 0:
        raise ValueError("pixel_pitch must be positive")
    f0, f1 = src.fwhm_pixels(pixel_pitch)
    return gaussian_blur(image, (f0 / FWHM_PER_SIGMA, f1 / FWHM_PER_SIGMA))


def shift_zero_pad(image: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Translate by whole pixels, filling vacated area with zeros."""
    out = np.zeros_like(image)
    n0, n1 = image.shape
    ys = slice(max(dy, 0), n0 + min(dy, 0))
    xs = slice(max(dx, 0), n1 + min(dx, 0))
    ys_src = slice(max(-dy, 0), n0 + min(-dy, 0))
    xs_src = slice(max(-dx, 0), n1 + min(-dx, 0))
    out[ys, xs] = image[ys_src, xs_src]
    return out


def bucket_measure(rendered_pattern: np.ndarray, phantom: Phantom, noise: NoiseModel,
                   exposure_index: int) -> float:
    """One bucket reading: integrate pattern x transmission, then add noise.

    The noiseless signal is S = sum(rendered * transmission).  Shot noise
    draws Poisson(S * photon_scale) / photon_scale, then Gaussian read
    noise and the dark offset are added.  The random stream is keyed by
    (noise.seed, exposure_index) so replays are exact.
    """
    rendered = np.asarray(rendered_pattern, dtype=np.float64)
    if rendered.shape != phantom.transmission.shape:
        raise ValueError(f"pattern shape {rendered.shape} != phantom shape {phantom.transmission.shape}")
    signal = float(np.sum(rendered * phantom.transmission))
    value = signal
    if noise.photon_scale > 0 or noise.read_noise_sigma > 0:
        rng = exposure_rng(noise.seed, exposure_index)
        if noise.photon_scale > 0:
            value = float(rng.poisson(signal * noise.photon_scale)) / noise.photon_scale
        if noise.read_noise_sigma > 0:
            value += rng.normal(0.0, noise.read_noise_sigma)
    return value + noise.dark_current


def _exposure_jitter(imp: ImperfectionModel, seed: int, record_index: int):
    if imp.jitter_sigma <= 0:
        return 0, 0
    rng = exposure_rng(seed, record_index, _TAG_JITTER)
    dy, dx = np.rint(rng.normal(0.0, imp.jitter_sigma, size=2)).astype(int)
    return int(dy), int(dx)


def _prepare(rendered, src, pixel_pitch, dy, dx):
    if src is not None:
        rendered = source_blur(rendered, src, pixel_pitch)
    if dy or dx:
        rendered = shift_zero_pad(rendered, dy, dx)
    return rendered


def run_acquisition(basis: HadamardBasis, index_list, phantom: Phantom,
                    imp: ImperfectionModel, src: SourceModel | None,
                    noise: NoiseModel, differential: bool,
                    progress=None) -> MeasurementSeries:
    """Measure one bucket record per selected Hadamard row.

    Per record t: render the positive (and, if differential, negative)
    pattern with mask imperfections, apply source blur, apply the per-record
    integer-pixel jitter (shared by both patterns of a pair), and measure.
    Bucket noise streams use exposure indices 2t (plus) and 2t+1 (minus);
    jitter uses its own stream keyed by t.  Deterministic given noise.seed.
    `progress(t, total)` is called after each completed record.
    """
    n = phantom.side
    if n * n != basis.size:
        raise ValueError(f"phantom side {n} does not match basis grid {basis.n}")
    index_list = np.asarray(index_list, dtype=np.int64)
    if index_list.size == 0:
        raise ValueError("index_list is empty")
    if index_list.min() < 0 or index_list.max() >= basis.size:
        raise ValueError("pattern index outside basis range")
    bucket_plus = np.empty(len(index_list))
    bucket_minus = np.empty(len(index_list)) if differential else None
    for t, idx in enumerate(index_list):
        pair = make_pattern_pair(basis, int(idx), n)
        dy, dx = _exposure_jitter(imp, noise.seed, t)
        plus = _prepare(render_mask(pair.positive, imp), src, phantom.pixel_pitch, dy, dx)
        bucket_plus[t] = bucket_measure(plus, phantom, noise, 2 * t)
        if differential:
            minus = _prepare(render_mask(pair.negative, imp), src, phantom.pixel_pitch, dy, dx)
            bucket_minus[t] = bucket_measure(minus, phantom, noise, 2 * t + 1)
        if progress is not None:
            progress(t + 1, len(index_list))
    return MeasurementSeries(
        n=n, modulation="hadamard", differential=differential,
        indices=index_list, bucket_plus=bucket_plus, bucket_minus=bucket_minus,
        imperfection=imp, source=src, noise=noise, pixel_pitch=phantom.pixel_pitch,
        basis_k=basis.order_log2, ordering=basis.ordering,
    )


def random_speckle_patterns(n: int, count: int, speckle_size_px: int, seed: int) -> np.ndarray:
    """Sandpaper-style random patterns: white Gaussian cells of the given
    size, nearest-neighbor upsampled to n x n, min-max normalized to [0, 1].

    Returns a (count, n, n) array; pattern i depends only on (seed, i).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 1 <= speckle_size_px <= n:
        raise ValueError(f"speckle size {speckle_size_px} outside [1, {n}]")
    cells = -(-n // speckle_size_px)  # ceil
    out = np.empty((count, n, n))
    for i in range(count):
        rng = exposure_rng(seed, i, _TAG_SPECKLE)
        grid = rng.normal(size=(cells, cells))
        up = np.repeat(np.repeat(grid, speckle_size_px, axis=0), speckle_size_px, axis=1)[:n, :n]
        span = up.max() - up.min()
        out[i] = (up - up.min()) / span if span > 0 else 0.0
    return out


def acquire_speckle(patterns: np.ndarray, phantom: Phantom, imp: ImperfectionModel,
                    src: SourceModel | None, noise: NoiseModel,
                    speckle_size_px: int = 1, progress=None) -> MeasurementSeries:
    """Single-bucket acquisition with pre-generated gray speckle patterns.

    Record t uses bucket exposure index 2t, matching the positive-bucket
    convention of run_acquisition.
    """
    patterns = np.asarray(patterns, dtype=np.float64)
    count = patterns.shape[0]
    bucket = np.empty(count)
    for t in range(count):
        dy, dx = _exposure_jitter(imp, noise.seed, t)
        rendered = _prepare(render_intensity(patterns[t], imp), src, phantom.pixel_pitch, dy, dx)
        bucket[t] = bucket_measure(rendered, phantom, noise, 2 * t)
        if progress is not None:
            progress(t + 1, count)
    return MeasurementSeries(
        n=phantom.side, modulation="speckle", differential=False,
        indices=np.arange(count, dtype=np.int64), bucket_plus=bucket, bucket_minus=None,
        imperfection=imp, source=src, noise=noise, pixel_pitch=phantom.pixel_pitch,
        speckle_size_px=speckle_size_px,
    )
