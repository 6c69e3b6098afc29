"""Image recovery from bucket measurement series.

Four reconstructors, in increasing model strength:

* correlation_gi   -- second-order intensity correlation (covariance form)
* differential_gi  -- signed-pattern correlation for complementary pairs;
                      at full sampling it inverts the Hadamard expansion
* tv_admm          -- anisotropic total-variation regularization solved by
                      an augmented-Lagrangian/ADMM gradient splitting
* wavelet_fista    -- Haar-domain l1 regularization solved by a monotone
                      FISTA with Nesterov momentum

Solvers see the measurements through a MeasurementOperator, either an
implicit FWHT-backed stack of ideal Hadamard rows or an explicit stack of
rendered (imperfect) patterns.  Everything here is deterministic: the only
randomness is a fixed-seed power iteration for the FISTA step size.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .hadamard import HadamardBasis, fwht2, make_pattern_pair
from .optics import ImperfectionModel, MeasurementSeries, SourceModel, render_mask, source_blur
from .wavelet import dwt2, idwt2, soft_threshold


@dataclass(frozen=True)
class MeasurementOperator:
    """Linear map from an n x n image to M bucket values.

    ideal_hadamard mode keeps only the selected row indices and applies
    them through the fast transform; explicit mode stores the rendered
    pattern stack (M, n, n) and applies dense contractions.
    """

    mode: str
    n: int
    indices: np.ndarray | None = None
    patterns: np.ndarray | None = None

    def __post_init__(self):
        if self.mode == "ideal_hadamard":
            if self.indices is None:
                raise ValueError("ideal_hadamard mode needs row indices")
        elif self.mode == "explicit":
            if self.patterns is None:
                raise ValueError("explicit mode needs a pattern stack")
            if self.patterns.shape[1:] != (self.n, self.n):
                raise ValueError(f"pattern stack shape {self.patterns.shape} != (M, {self.n}, {self.n})")
        else:
            raise ValueError(f"unknown operator mode {self.mode!r}")

    @property
    def shape(self):
        m = len(self.indices) if self.mode == "ideal_hadamard" else len(self.patterns)
        return (m, self.n * self.n)

    def apply(self, image: np.ndarray) -> np.ndarray:
        """A @ vec(image) -> length-M bucket vector."""
        if self.mode == "ideal_hadamard":
            return fwht2(image).ravel()[self.indices]
        return np.tensordot(self.patterns, image, axes=([1, 2], [0, 1]))

    def adjoint(self, buckets: np.ndarray) -> np.ndarray:
        """A^T @ buckets -> n x n image."""
        if self.mode == "ideal_hadamard":
            coeff = np.zeros(self.n * self.n)
            np.add.at(coeff, self.indices, buckets)
            return fwht2(coeff.reshape(self.n, self.n))
        return np.tensordot(buckets, self.patterns, axes=(0, 0))

    def gram(self, image: np.ndarray) -> np.ndarray:
        return self.adjoint(self.apply(image))


def build_operator(basis: HadamardBasis, index_list, imp: ImperfectionModel | None = None,
                   src: SourceModel | None = None, mode: str = "ideal_hadamard",
                   differential: bool = True, pixel_pitch: float = 1.0) -> MeasurementOperator:
    """Sensing operator for the given basis rows.

    ideal_hadamard refuses imperfect optics -- its rows are exact signed
    Hadamard patterns, valid only for differential buckets under an ideal
    mask.  explicit mode renders each selected pattern (difference of the
    complementary pair when differential) through the imperfection and
    source models, capturing deterministic mask defects in the operator.
    """
    indices = np.asarray(index_list, dtype=np.int64)
    n = basis.n
    if indices.size == 0:
        raise ValueError("index_list is empty")
    if indices.min() < 0 or indices.max() >= basis.size:
        raise ValueError("pattern index outside basis range")
    if mode == "ideal_hadamard":
        if imp is not None and not imp.ideal:
            raise ValueError("ideal_hadamard operator requires an ideal mask "
                             "(modulation_depth=1, zero blur/jitter); use explicit mode")
        if src is not None:
            raise ValueError("ideal_hadamard operator cannot include source blur; use explicit mode")
        return MeasurementOperator(mode="ideal_hadamard", n=n, indices=indices)
    if mode != "explicit":
        raise ValueError(f"unknown operator mode {mode!r}")
    imp = imp if imp is not None else ImperfectionModel()
    stack = np.empty((len(indices), n, n))
    for t, idx in enumerate(indices):
        pair = make_pattern_pair(basis, int(idx), n)
        rendered = render_mask(pair.positive, imp)
        if differential:
            rendered = rendered - render_mask(pair.negative, imp)
        if src is not None:
            rendered = source_blur(rendered, src, pixel_pitch)
        stack[t] = rendered
    return MeasurementOperator(mode="explicit", n=n, patterns=stack)


def operator_from_patterns(patterns: np.ndarray) -> MeasurementOperator:
    """Explicit operator from an arbitrary (M, n, n) pattern stack."""
    patterns = np.asarray(patterns, dtype=np.float64)
    return MeasurementOperator(mode="explicit", n=patterns.shape[-1], patterns=patterns)


@dataclass(frozen=True)
class ReconResult:
    """A reconstruction plus its convergence record.

    final_residual is ||Ax - b|| / ||b|| for model-based solvers and 0.0
    for the direct correlation estimators (they have no residual notion).
    """

    image: np.ndarray
    iterations: int
    final_residual: float
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    wall_time: float = 0.0

    @property
    def converged(self) -> bool:
        return np.isfinite(self.final_residual)


def nominal_patterns(basis: HadamardBasis, indices, signed: bool) -> np.ndarray:
    """Designed pattern stack for the given rows: signed +-1 rows, or the
    binary positive-half masks P+ = (1 + row)/2."""
    indices = np.asarray(indices, dtype=np.int64)
    n = basis.n
    out = np.empty((len(indices), n, n))
    for t, idx in enumerate(indices):
        row = basis.row_pattern(int(idx)).astype(np.float64)
        out[t] = row if signed else (1.0 + row) / 2.0
    return out


def series_buckets(series: MeasurementSeries) -> np.ndarray:
    """The bucket vector a reconstructor should consume: the plus bucket,
    or the plus-minus difference for differential series."""
    if series.differential:
        return series.bucket_plus - series.bucket_minus
    return np.asarray(series.bucket_plus)


def correlation_gi(series: MeasurementSeries, patterns: np.ndarray) -> ReconResult:
    """Ensemble-covariance ghost image.

    G(x) = <P_i(x) B_i> - <P_i(x)><B_i>, averaging over exposures.  For a
    differential series B_i is the bucket difference and the aligned
    patterns should be the signed ones.
    """
    start = time.perf_counter()
    patterns = np.asarray(patterns, dtype=np.float64)
    buckets = series_buckets(series)
    m = len(buckets)
    if m < 2:
        raise ValueError("correlation needs at least 2 records")
    if len(patterns) != m:
        raise ValueError(f"{len(patterns)} patterns for {m} records")
    corr = np.tensordot(buckets, patterns, axes=(0, 0)) / m
    image = corr - patterns.mean(axis=0) * buckets.mean()
    return ReconResult(image=image, iterations=m, final_residual=0.0,
                       wall_time=time.perf_counter() - start)


def differential_gi(series: MeasurementSeries) -> ReconResult:
    """Signed-pattern correlation G = (1/M) sum_i (B+_i - B-_i) P_i using
    the fast transform; with an ideal mask and the full basis this is the
    inverse Hadamard expansion of the object."""
    start = time.perf_counter()
    if not series.differential or series.bucket_minus is None:
        raise ValueError("differential_gi needs a differential series (bucket_minus present)")
    if series.modulation != "hadamard":
        raise ValueError("differential_gi is defined for Hadamard series")
    n = series.n
    m = len(series)
    diff = series.bucket_plus - series.bucket_minus
    coeff = np.zeros(n * n)
    np.add.at(coeff, series.indices, diff)
    image = fwht2(coeff.reshape(n, n)) / m
    return ReconResult(image=image, iterations=m, final_residual=0.0,
                       wall_time=time.perf_counter() - start)


def _grad(x: np.ndarray):
    """Forward differences, zero gradient past the last row/column."""
    gh = np.zeros_like(x)
    gv = np.zeros_like(x)
    gh[:, :-1] = x[:, 1:] - x[:, :-1]
    gv[:-1, :] = x[1:, :] - x[:-1, :]
    return gh, gv


def _grad_adjoint(gh: np.ndarray, gv: np.ndarray) -> np.ndarray:
    out = np.zeros_like(gh)
    out[:, :-1] -= gh[:, :-1]
    out[:, 1:] += gh[:, :-1]
    out[:-1, :] -= gv[:-1, :]
    out[1:, :] += gv[:-1, :]
    return out


def _cg(matvec, rhs, x0, iters, tol):
    """Conjugate gradients on a symmetric positive system, warm-started."""
    x = x0.copy()
    r = rhs - matvec(x)
    p = r.copy()
    rs = float(np.vdot(r, r))
    floor = tol * tol * max(float(np.vdot(rhs, rhs)), 1e-300)
    for _ in range(iters):
        if rs <= floor:
            break
        ap = matvec(p)
        alpha = rs / float(np.vdot(p, ap))
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.vdot(r, r))
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def tv_admm(op: MeasurementOperator, buckets: np.ndarray, mu: float = 256.0,
            beta: float = 32.0, max_iters: int = 500, tol: float = 1e-7,
            cg_iters: int = 20) -> ReconResult:
    """Anisotropic-TV reconstruction, min_x TV(x) + (mu/2)||Ax - b||^2.

    Gradient-splitting ADMM: auxiliary w ~ grad x with scaled multipliers,
    closed-form shrinkage for w, warm-started conjugate gradients for the
    x system (mu A^T A + beta D^T D).  beta is fixed for the whole run.

    Raw ADMM iterates can overshoot, so the reported iterate carries a
    monotone safeguard: the multiplier recursion runs untouched, but the
    result (and the objective trace) tracks the best objective value seen
    so far.  The returned residual is relative to ||b||.
    """
    if mu <= 0 or beta <= 0:
        raise ValueError("mu and beta must be positive")
    start = time.perf_counter()
    b = np.asarray(buckets, dtype=np.float64)
    n = op.n
    x = np.zeros((n, n))
    wh = np.zeros((n, n))
    wv = np.zeros((n, n))
    uh = np.zeros((n, n))
    uv = np.zeros((n, n))
    atb = op.adjoint(b)
    b_norm = max(float(np.linalg.norm(b)), 1e-300)

    def system(v):
        gh, gv = _grad(v)
        return mu * op.gram(v) + beta * _grad_adjoint(gh, gv)

    def objective(v):
        gh, gv = _grad(v)
        fid = float(np.linalg.norm(op.apply(v) - b)) ** 2
        return float(np.abs(gh).sum() + np.abs(gv).sum()) + 0.5 * mu * fid

    trace = []
    iterations = 0
    x_best = x
    f_best = objective(x)
    for it in range(max_iters):
        rhs = mu * atb + beta * _grad_adjoint(wh - uh, wv - uv)
        x_new = _cg(system, rhs, x, cg_iters, 1e-12)
        gh, gv = _grad(x_new)
        wh = np.sign(gh + uh) * np.maximum(np.abs(gh + uh) - 1.0 / beta, 0.0)
        wv = np.sign(gv + uv) * np.maximum(np.abs(gv + uv) - 1.0 / beta, 0.0)
        uh += gh - wh
        uv += gv - wv
        f_new = objective(x_new)
        if f_new <= f_best:
            f_best = f_new
            x_best = x_new
        trace.append(f_best)
        iterations = it + 1
        change = np.linalg.norm(x_new - x) / max(np.linalg.norm(x), 1e-300)
        x = x_new
        if it > 0 and change < tol:
            break
    residual = float(np.linalg.norm(op.apply(x_best) - b)) / b_norm
    return ReconResult(image=x_best, iterations=iterations, final_residual=residual,
                       objective_trace=np.asarray(trace),
                       wall_time=time.perf_counter() - start)


def estimate_lipschitz(op: MeasurementOperator, iters: int = 20) -> float:
    """Largest eigenvalue of A^T A by power iteration (fixed seed, so the
    estimate is reproducible)."""
    rng = np.random.default_rng(12345)
    v = rng.standard_normal((op.n, op.n))
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(iters):
        w = op.gram(v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 1.0
        v = w / lam
    return lam


def wavelet_fista(op: MeasurementOperator, buckets: np.ndarray, lam: float = 1e-3,
                  levels: int = 3, max_iters: int = 300, tol: float = 1e-7) -> ReconResult:
    """Haar-sparse reconstruction, min_x (1/2)||Ax-b||^2 + lam ||W_d x||_1.

    FISTA with the monotone safeguard: each iteration takes the proximal
    candidate only if it does not increase the objective, so the recorded
    trace never rises.  Step size is 1/L with L from 20 power iterations
    (inflated 5% to absorb the estimate's bias); the prox is analysis ->
    detail soft-threshold -> synthesis, exact because the transform is
    orthonormal.  The approximation band is never penalized.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    start = time.perf_counter()
    b = np.asarray(buckets, dtype=np.float64)
    n = op.n
    if n % (1 << levels):
        raise ValueError(f"side {n} not divisible by 2^{levels}")
    lip = estimate_lipschitz(op) * 1.05
    step = 1.0 / lip
    b_norm = max(float(np.linalg.norm(b)), 1e-300)

    def objective(v):
        fid = 0.5 * float(np.linalg.norm(op.apply(v) - b)) ** 2
        if lam == 0.0:
            return fid
        pyr = dwt2(v, levels)
        l1 = sum(float(np.abs(band).sum()) for triple in pyr.details for band in triple)
        return fid + lam * l1

    def prox(v):
        if lam == 0.0:
            return v
        return idwt2(soft_threshold(dwt2(v, levels), lam * step))

    atb = op.adjoint(b)
    x = np.zeros((n, n))
    y = x.copy()
    f_x = objective(x)
    t = 1.0
    trace = []
    iterations = 0
    for it in range(max_iters):
        z = prox(y - step * (op.gram(y) - atb))
        f_z = objective(z)
        accepted = f_z <= f_x
        x_new = z if accepted else x
        f_new = f_z if accepted else f_x
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + (t / t_next) * (z - x_new) + ((t - 1.0) / t_next) * (x_new - x)
        change = np.linalg.norm(x_new - x) / max(np.linalg.norm(x), 1e-300)
        x, f_x, t = x_new, f_new, t_next
        trace.append(f_x)
        iterations = it + 1
        if accepted and it > 0 and change < tol:
            break
    residual = float(np.linalg.norm(op.apply(x) - b)) / b_norm
    return ReconResult(image=x, iterations=iterations, final_residual=residual,
                       objective_trace=np.asarray(trace),
                       wall_time=time.perf_counter() - start)


def normalize_unit(image: np.ndarray) -> np.ndarray:
    """Affine min-max map to [0, 1]; a constant image maps to zeros."""
    lo = float(image.min())
    span = float(image.max()) - lo
    if span == 0.0:
        return np.zeros_like(image)
    return (image - lo) / span
