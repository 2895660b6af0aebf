"""Counter-based SplitMix64 random streams.

Every random decision in the package is drawn from a named stream derived
from the 64-bit master seed, so runs are reproducible across platforms and
backends without carrying mutable RNG state around. A stream is (seed, pos);
draw j of a stream is

    mix64(seed + (pos + j + 1) * GOLDEN)   all arithmetic mod 2**64

with the usual SplitMix64 finalizer. Stream seeds are derived from a root
seed and a list of text labels via FNV-1a over the label bytes:

    seed_{i+1} = mix64((seed_i + GOLDEN) ^ fnv1a64(label_i))

Labels may be ints; they are formatted as decimal text first. Child streams
use the same derivation with the parent's seed as root, so the full stream
tree is addressable by (master_seed, path of labels).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX_B = 0xBF58476D1CE4E5B9
MIX_C = 0x94D049BB133111EB
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

_U53_INV = 2.0 ** -53


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a python int (exact 64-bit wrap)."""
    z &= MASK64
    z ^= z >> 30
    z = (z * MIX_B) & MASK64
    z ^= z >> 27
    z = (z * MIX_C) & MASK64
    z ^= z >> 31
    return z


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & MASK64
    return h


def derive_seed(root: int, *labels) -> int:
    """Fold text labels into a 64-bit stream seed."""
    h = root & MASK64
    for lab in labels:
        h = mix64(((h + GOLDEN) & MASK64) ^ fnv1a64(str(lab).encode("utf-8")))
    return h


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    # uint64 array ops wrap mod 2**64; keep everything vectorized so the
    # scalar overflow warning path is never hit
    with np.errstate(over="ignore"):
        z = z ^ (z >> np.uint64(30))
        z = z * np.uint64(MIX_B)
        z = z ^ (z >> np.uint64(27))
        z = z * np.uint64(MIX_C)
        z = z ^ (z >> np.uint64(31))
    return z


class Stream:
    """One named random stream. Draw methods advance an integer counter;
    n draws then m draws yield the same values as one draw of n + m."""

    __slots__ = ("seed", "_pos")

    def __init__(self, seed: int, pos: int = 0):
        self.seed = seed & MASK64
        self._pos = pos

    @classmethod
    def from_root(cls, root: int, *labels) -> "Stream":
        return cls(derive_seed(root, *labels))

    def child(self, *labels) -> "Stream":
        return Stream(derive_seed(self.seed, *labels))

    def u64(self, n: int) -> np.ndarray:
        idx = np.arange(self._pos + 1, self._pos + n + 1, dtype=np.uint64)
        self._pos += n
        with np.errstate(over="ignore"):
            state = np.uint64(self.seed) + idx * np.uint64(GOLDEN)
        return _mix64_vec(state)

    def uniform(self, n: int) -> np.ndarray:
        """float64 in [0, 1): top 53 bits scaled by 2**-53."""
        return (self.u64(n) >> np.uint64(11)).astype(np.float64) * _U53_INV

    def normal(self, n: int, sigma: float = 1.0) -> np.ndarray:
        """Box-Muller on pairs of uniforms.

        Consumes 2 * ceil(n/2) raw words in one block: the first half maps
        through ((w >> 11) + 1) * 2**-53 to (0, 1] for the log, the second
        half to [0, 1) for the angle. Output is [r*cos, r*sin] concatenated,
        truncated to n.
        """
        k = (n + 1) // 2
        w = self.u64(2 * k)
        u1 = ((w[:k] >> np.uint64(11)).astype(np.float64) + 1.0) * _U53_INV
        u2 = (w[k:] >> np.uint64(11)).astype(np.float64) * _U53_INV
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return out * sigma if sigma != 1.0 else out

    def integers(self, n: int, bound: int) -> np.ndarray:
        """int64 in [0, bound) via floor(uniform * bound).

        Modulo bias is below 2**-40 for any bound this package uses.
        """
        if bound <= 0:
            raise ValueError("bound must be positive")
        return np.floor(self.uniform(n) * bound).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Uniform permutation of range(n): stable argsort of n raw words."""
        return np.argsort(self.u64(n), kind="stable")

    def signs(self, n: int) -> np.ndarray:
        """float64 entries in {-1.0, +1.0} from the top bit of each word."""
        return 1.0 - 2.0 * (self.u64(n) >> np.uint64(63)).astype(np.float64)
