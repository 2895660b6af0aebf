"""Shared-secret material: per-message keys and symbol scrambling.

Both ends of a private link hold a 64-bit secret seed. Message i derives its
key vector and its scrambler from streams named ("key", i) and
("scramble", i) under that seed, so the receiver needs nothing beyond the
secret and the message counter.

The scrambler is a per-message orthogonal map built from parameter-free
pieces: sign flips, an orthonormal DCT-II rotation, a permutation, a second
rotation, more sign flips. Orthogonality keeps transmit power exactly
normalized, and the inverse is the transposed sequence, so legitimate
decoding pays nothing. An observer without the secret sees symbols whose
per-message basis keeps changing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..nn import Tensor, matmul_const, mul_const, permute_cols
from ..prng import Stream

_DCT_CACHE: dict = {}


def dct_matrix(m: int) -> np.ndarray:
    """Orthonormal DCT-II basis as an (m, m) matrix (rows are basis
    vectors), cached per size."""
    if m not in _DCT_CACHE:
        j = np.arange(m)[None, :]
        k = np.arange(m)[:, None]
        c = np.cos(math.pi * (2 * j + 1) * k / (2 * m)) * math.sqrt(2.0 / m)
        c[0, :] *= 1.0 / math.sqrt(2.0)
        _DCT_CACHE[m] = c.T.copy()  # column-orthonormal for right-multiply
    return _DCT_CACHE[m]


@dataclass
class ScrambleParams:
    signs_a: np.ndarray  # (n, m)
    perm: np.ndarray     # (n, m) int64
    signs_b: np.ndarray
    signs_c: np.ndarray


@dataclass
class SessionKey:
    secret_seed: int
    key_len: int = 16
    _root: Stream = field(init=False, repr=False)

    def __post_init__(self):
        self._root = Stream.from_root(self.secret_seed, "session")

    def keys_for(self, indices: np.ndarray) -> np.ndarray:
        """(n, key_len) matrix of +-1 key entries, one row per message."""
        out = np.empty((len(indices), self.key_len))
        for r, i in enumerate(indices):
            out[r] = self._root.child("key", int(i)).signs(self.key_len)
        return out

    def scramble_params(self, indices: np.ndarray, m: int) -> ScrambleParams:
        n = len(indices)
        sa = np.empty((n, m))
        sb = np.empty((n, m))
        sc = np.empty((n, m))
        pm = np.empty((n, m), dtype=np.int64)
        for r, i in enumerate(indices):
            s = self._root.child("scramble", int(i))
            sa[r] = s.signs(m)
            pm[r] = s.permutation(m)
            sb[r] = s.signs(m)
            sc[r] = s.signs(m)
        return ScrambleParams(sa, pm, sb, sc)


def scramble(x: Tensor, p: ScrambleParams) -> Tensor:
    c = dct_matrix(x.data.shape[1])
    y = mul_const(x, p.signs_a)
    y = matmul_const(y, c)
    y = mul_const(y, p.signs_b)
    y = permute_cols(y, p.perm)
    y = matmul_const(y, c)
    return mul_const(y, p.signs_c)


def descramble(x: Tensor, p: ScrambleParams) -> Tensor:
    c = dct_matrix(x.data.shape[1])
    inv = np.argsort(p.perm, axis=1)
    y = mul_const(x, p.signs_c)
    y = matmul_const(y, c.T.copy())
    y = permute_cols(y, inv)
    y = mul_const(y, p.signs_b)
    y = matmul_const(y, c.T.copy())
    return mul_const(y, p.signs_a)
