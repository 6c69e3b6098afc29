"""Hadamard measurement bases for single-pixel imaging.

A basis of order k covers a 2^k x 2^k pixel grid: each of the N = 4^k rows
of the Sylvester matrix H_N, reshaped row-major to n x n (n = 2^k), is one
illumination pattern.  Binary masks cannot realize -1, so each signed row is
split into a complementary pair of {0,1} patterns.

All transforms here are unnormalized (pure +-1 sums); callers own any 1/N
factors.
"""

import math
from dataclasses import dataclass, field

import numpy as np

ORDERINGS = ("natural", "sequency", "connectivity")

# Hard resource guard for dense Sylvester construction (2^13 = 8192).
MAX_SYLVESTER_LOG2 = 13


def sylvester(k: int) -> np.ndarray:
    """Sylvester Hadamard matrix of size 2^k x 2^k, entries +-1 (int32).

    Row 0 is all ones and the recursion is [[H, H], [H, -H]], so the
    result satisfies H @ H.T == 2^k * I exactly in integer arithmetic.
    """
    if not 0 <= k <= MAX_SYLVESTER_LOG2:
        raise ValueError(f"sylvester order k={k} outside [0, {MAX_SYLVESTER_LOG2}]")
    H = np.array([[1]], dtype=np.int32)
    for _ in range(k):
        H = np.block([[H, H], [H, -H]])
    return H


def fwht(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Fast Walsh-Hadamard transform H_n @ v along one axis, O(n log n).

    Natural (Sylvester) order, unnormalized: fwht(fwht(v)) == n * v.
    The axis length must be a power of two.
    """
    a = np.moveaxis(np.asarray(v), axis, -1)
    n = a.shape[-1]
    if n == 0 or n & (n - 1):
        raise ValueError(f"fwht length {n} is not a power of two")
    a = np.array(a, dtype=np.float64, order="C")
    flat = a.reshape(-1, n)
    h = 1
    while h < n:
        b = flat.reshape(-1, 2 * h)
        x = b[:, :h].copy()
        b[:, :h] += b[:, h:]
        b[:, h:] *= -1
        b[:, h:] += x
        h *= 2
    return np.moveaxis(a, -1, axis)


def fwht2(image: np.ndarray) -> np.ndarray:
    """2D transform H_n @ X @ H_n of an n x n image.

    Flattened row-major, this equals H_N @ vec(X) with N = n^2: entry
    (i, j) of the result is the bucket value of signed pattern i*n + j.
    """
    return fwht(fwht(image, axis=-1), axis=-2)


@dataclass(frozen=True)
class HadamardBasis:
    """Ordered Hadamard basis over a 2^k x 2^k image grid.

    permutation[m] is the raw Sylvester row index measured at step m.
    """

    order_log2: int
    ordering: str
    permutation: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return 1 << self.order_log2

    @property
    def size(self) -> int:
        return 1 << (2 * self.order_log2)

    def matrix(self) -> np.ndarray:
        """Dense N x N Sylvester matrix underlying this basis."""
        return sylvester(2 * self.order_log2)

    def row_pattern(self, index: int) -> np.ndarray:
        """Signed row `index` of H_N reshaped row-major to n x n.

        Uses the separability of Sylvester rows (the reshaped row is an
        outer product of two H_n rows), so no N x N matrix is built.
        """
        n = self.n
        if not 0 <= index < self.size:
            raise ValueError(f"row index {index} outside [0, {self.size})")
        Hn = sylvester(self.order_log2)
        return np.outer(Hn[index >> self.order_log2], Hn[index & (n - 1)])


@dataclass(frozen=True)
class PatternPair:
    """Complementary binary realization of one signed Hadamard row.

    positive + negative == all-ones, entries in {0, 1}.
    """

    positive: np.ndarray
    negative: np.ndarray


def make_basis(k: int, ordering: str = "natural") -> HadamardBasis:
    """Build the basis for a 2^k x 2^k grid with the given row ordering."""
    if 2 * k > MAX_SYLVESTER_LOG2:
        raise ValueError(f"basis order k={k} needs a 2^{2 * k} Sylvester matrix; max is 2^{MAX_SYLVESTER_LOG2}")
    stub = HadamardBasis(k, "natural", np.arange(1 << (2 * k), dtype=np.int64))
    if ordering == "natural":
        return stub
    return HadamardBasis(k, ordering, order_basis(stub, ordering))


def order_basis(basis: HadamardBasis, strategy: str) -> np.ndarray:
    """Permutation of raw row indices for a given ordering strategy.

    natural       identity.
    sequency      ascending count of sign changes along the 1D row.
    connectivity  ascending count of 0<->1 transitions along the rows and
                  columns of the reshaped n x n pattern (coarse patterns
                  first, which front-loads image energy for compression).

    Ties are broken by natural index; the result is deterministic.
    """
    N = basis.size
    if strategy == "natural":
        return np.arange(N, dtype=np.int64)
    H = basis.matrix()
    if strategy == "sequency":
        keys = np.count_nonzero(H[:, 1:] != H[:, :-1], axis=1)
    elif strategy == "connectivity":
        n = basis.n
        P = H.reshape(N, n, n)
        keys = np.count_nonzero(P[:, :, 1:] != P[:, :, :-1], axis=(1, 2))
        keys = keys + np.count_nonzero(P[:, 1:, :] != P[:, :-1, :], axis=(1, 2))
    else:
        raise ValueError(f"unknown ordering strategy {strategy!r}")
    return np.argsort(keys, kind="stable").astype(np.int64)


def compress(permutation: np.ndarray, rate: float) -> np.ndarray:
    """First M = round(rate * N) entries of the permutation (round half up).

    rate must lie in (0, 1]; M is clamped to at least 1.
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"sampling rate {rate} outside (0, 1]")
    N = len(permutation)
    M = max(1, int(math.floor(rate * N + 0.5)))
    return np.asarray(permutation[:M])


def make_pattern_pair(basis: HadamardBasis, index: int, n: int) -> PatternPair:
    """Split raw row `index` into its complementary binary pattern pair."""
    if n * n != basis.size:
        raise ValueError(f"pattern side {n} does not match basis size {basis.size}")
    row = basis.row_pattern(index)
    positive = ((1 + row) // 2).astype(np.uint8)
    negative = ((1 - row) // 2).astype(np.uint8)
    return PatternPair(positive, negative)


def save_basis(basis: HadamardBasis, path, count: int | None = None) -> None:
    """Write the text export: header line, then the ordering permutation as
    CSV ints.  `count` truncates to the first M selected indices (a
    compressed-sampling export); default writes the full permutation."""
    entries = basis.permutation if count is None else basis.permutation[:count]
    with open(path, "w") as f:
        f.write(f"HAD k={basis.order_log2} order={basis.ordering}\n")
        f.write(",".join(str(int(i)) for i in entries))
        f.write("\n")


def load_selection(path):
    """Read a basis export: (k, ordering, selected indices).

    Accepts both full-permutation files and compressed prefixes; entries
    must be distinct raw row indices for the declared k.
    """
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 3 or header[0] != "HAD":
            raise ValueError(f"{path}: not a basis export file")
        fields = dict(part.split("=", 1) for part in header[1:])
        indices = np.array([int(s) for s in f.readline().split(",")], dtype=np.int64)
    k = int(fields["k"])
    size = 1 << (2 * k)
    if len(indices) == 0 or len(indices) > size:
        raise ValueError(f"{path}: {len(indices)} indices for basis of {size} rows")
    if indices.min() < 0 or indices.max() >= size or len(np.unique(indices)) != len(indices):
        raise ValueError(f"{path}: indices are not distinct rows of [0, {size})")
    return k, fields["order"], indices


def load_basis(path) -> HadamardBasis:
    k, ordering, perm = load_selection(path)
    basis = HadamardBasis(k, ordering, perm)
    if len(perm) != basis.size:
        raise ValueError(f"{path}: permutation is not a bijection on [0, {basis.size})")
    return basis
