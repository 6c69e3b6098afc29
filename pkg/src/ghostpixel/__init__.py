"""Single-pixel x-ray ghost imaging toolkit.

Hadamard measurement bases with truncation-friendly orderings, a
deterministic acquisition simulator with mask/source imperfections and
photon noise, and reconstruction by correlation, differential GI,
TV-ADMM, or wavelet FISTA, plus the metrics to compare them.
"""

from .hadamard import (
    HadamardBasis,
    compress,
    fwht,
    fwht2,
    load_basis,
    load_selection,
    make_basis,
    make_pattern_pair,
    save_basis,
    sylvester,
)
from .metrics import (
    DegenerateImageError,
    RegionMask,
    cnr,
    knife_edge_fwhm,
    modulation_depth,
    mse_psnr_ncorr,
)
from .optics import (
    ImperfectionModel,
    MeasurementSeries,
    NoiseModel,
    Phantom,
    SourceModel,
    acquire_speckle,
    random_speckle_patterns,
    run_acquisition,
)
from .phantoms import PHANTOM_KINDS, PhantomSpec, generate
from .reconstruct import (
    MeasurementOperator,
    ReconResult,
    build_operator,
    correlation_gi,
    differential_gi,
    normalize_unit,
    tv_admm,
    wavelet_fista,
)
from .wavelet import WaveletPyramid, dwt2, idwt2

__version__ = "0.1.0"

__all__ = [
    "HadamardBasis",
    "compress",
    "fwht",
    "fwht2",
    "load_basis",
    "load_selection",
    "make_basis",
    "make_pattern_pair",
    "save_basis",
    "sylvester",
    "DegenerateImageError",
    "RegionMask",
    "cnr",
    "knife_edge_fwhm",
    "modulation_depth",
    "mse_psnr_ncorr",
    "ImperfectionModel",
    "MeasurementSeries",
    "NoiseModel",
    "Phantom",
    "SourceModel",
    "acquire_speckle",
    "random_speckle_patterns",
    "run_acquisition",
    "PHANTOM_KINDS",
    "PhantomSpec",
    "generate",
    "MeasurementOperator",
    "ReconResult",
    "build_operator",
    "correlation_gi",
    "differential_gi",
    "normalize_unit",
    "tv_admm",
    "wavelet_fista",
    "WaveletPyramid",
    "dwt2",
    "idwt2",
]
