"""Build Hadamard measurement bases and look at what the orderings do.

Every measurement pattern is one row of a Sylvester Hadamard matrix,
reshaped to the 2D grid and split into a complementary 0/1 pair (the
mask can only block or pass x-rays, not apply -1).  The three orderings
decide which rows get measured first when the acquisition is truncated.
"""

import os

import numpy as np

from ghostpixel.formats import save_pgm
from ghostpixel.hadamard import fwht2, make_basis, make_pattern_pair, sylvester

out_dir = os.path.join(os.path.dirname(os.path.abspath(__file__)), "output")
os.makedirs(out_dir, exist_ok=True)

# Orthogonality: H Ht = N I, exactly, in integer arithmetic
H = sylvester(4)
print("sylvester order 16: H @ H.T == 16 I ->",
      np.array_equal(H @ H.T, 16 * np.eye(16, dtype=H.dtype)))

# A 32x32 grid needs k=5 (per side), i.e. N = 1024 patterns
for ordering in ("natural", "sequency", "connectivity"):
    basis = make_basis(5, ordering)
    first = basis.permutation[:8]
    print(f"{ordering:>12s}: first rows measured = {list(map(int, first))}")

# Complementary pattern pair for one row: P+ + P- = all ones
basis = make_basis(5, "connectivity")
pair = make_pattern_pair(basis, int(basis.permutation[3]), 32)
print("complementary pair covers the grid:",
      np.array_equal(pair.positive + pair.negative, np.ones((32, 32))))
save_pgm(os.path.join(out_dir, "pattern_plus.pgm"), pair.positive)
save_pgm(os.path.join(out_dir, "pattern_minus.pgm"), pair.negative)

# The separable 2D transform: one FWHT per axis, O(N log N) overall.
rng = np.random.default_rng(0)
x = rng.normal(size=(32, 32))
coeffs = fwht2(x)
print("fwht2 round trip max err:",
      float(np.max(np.abs(fwht2(coeffs) / 1024 - x))))
print("wrote pattern_plus.pgm / pattern_minus.pgm under", out_dir)
