"""Network builders for the codec experts and the gate.

All experts share the same fixed layer plan: dense layers only, ReLU between
hidden layers, linear outputs. Initial weights come from a named stream, so
a builder called twice with equal streams produces bit-identical parameters.
The robust trainer exploits that: it draws from the same init stream as the
normal codec, which keeps the two feature geometries aligned enough for the
covert compressor (fit on normal features) to transfer.
"""

from __future__ import annotations

import math

import numpy as np

from ..nn import ParameterSet, Tensor, affine, relu
from ..prng import Stream

D_INPUT = 256
D_SEM = 32
KEY_LEN = 16
CLS_HIDDEN = 64
ENC_HIDDEN = 128


class Affine:
    """One dense layer bound to named parameters in a ParameterSet."""

    def __init__(self, ps: ParameterSet, name: str, fan_in: int, fan_out: int,
                 stream: Stream, gain: str = "linear"):
        if gain == "relu":
            std = math.sqrt(2.0 / fan_in)
            w = stream.normal(fan_in * fan_out, sigma=std).reshape(fan_in, fan_out)
        elif gain == "linear":
            std = math.sqrt(1.0 / fan_in)
            w = stream.normal(fan_in * fan_out, sigma=std).reshape(fan_in, fan_out)
        elif gain == "near_identity":
            if fan_in != fan_out:
                raise ValueError("near_identity needs a square layer")
            w = np.eye(fan_in) + stream.normal(fan_in * fan_out, sigma=0.02) \
                .reshape(fan_in, fan_out)
        else:
            raise ValueError(f"unknown gain: {gain}")
        self.w = ps.add(f"{name}.w", w)
        self.b = ps.add(f"{name}.b", np.zeros(fan_out))

    def __call__(self, x: Tensor) -> Tensor:
        return affine(x, self.w, self.b)


class Mlp:
    """Dense stack with ReLU after every layer except the last."""

    def __init__(self, ps: ParameterSet, name: str, dims: tuple,
                 stream: Stream):
        self.layers = []
        for i, (fi, fo) in enumerate(zip(dims[:-1], dims[1:])):
            g = "relu" if i < len(dims) - 2 else "linear"
            self.layers.append(Affine(ps, f"{name}.{i}", fi, fo, stream, g))

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = relu(x)
        return x


def build_semantic_encoder(ps: ParameterSet, stream: Stream,
                           prefix: str = "enc") -> Mlp:
    return Mlp(ps, prefix, (D_INPUT, ENC_HIDDEN, D_SEM), stream)


def build_classifier(ps: ParameterSet, stream: Stream, k: int,
                     prefix: str = "cls") -> Mlp:
    return Mlp(ps, prefix, (D_SEM, CLS_HIDDEN, k), stream)


class ChannelPair:
    """Symbol-domain affine codec: encode before the channel, decode after.
    Both maps start near identity so early training transmits features
    almost unchanged."""

    def __init__(self, ps: ParameterSet, stream: Stream, d: int,
                 prefix: str = "chan"):
        self.d = d
        self.enc = Affine(ps, f"{prefix}.enc", d, d, stream, "near_identity")
        self.dec = Affine(ps, f"{prefix}.dec", d, d, stream, "near_identity")


def _orthonormal_cols(stream: Stream, rows: int, cols: int) -> np.ndarray:
    a = stream.normal(rows * rows).reshape(rows, rows)
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))[None, :]
    return q[:, :cols]


class CompressorPair:
    """Affine down/up projection around the channel codec. The encoder
    starts as an orthonormal projection and the decoder as its transpose,
    which is already the least-squares optimum for white features."""

    def __init__(self, ps: ParameterSet, stream: Stream, d_sem: int,
                 d_prime: int, prefix: str = "comp"):
        self.d_sem = d_sem
        self.d_prime = d_prime
        q = _orthonormal_cols(stream, d_sem, d_prime)
        self.enc_w = ps.add(f"{prefix}.enc.w", q)
        self.enc_b = ps.add(f"{prefix}.enc.b", np.zeros(d_prime))
        self.dec_w = ps.add(f"{prefix}.dec.w", q.T.copy())
        self.dec_b = ps.add(f"{prefix}.dec.b", np.zeros(d_sem))

    def encode(self, x: Tensor) -> Tensor:
        return affine(x, self.enc_w, self.enc_b)

    def decode(self, z: Tensor) -> Tensor:
        return affine(z, self.dec_w, self.dec_b)


class PrivateMixers:
    """Key-conditioned affine stages wrapped around an existing codec.

    mix_in eats [image ; key] and feeds the semantic encoder; mix_out eats
    [decoded features ; key] and feeds the classifier. Both start exactly
    transparent: identity on the data block, zero key coupling. The wrapped
    codec then behaves like the unwrapped one from step zero and training
    decides how much key structure to blend in.
    """

    def __init__(self, ps: ParameterSet, stream: Stream,
                 d_in: int = D_INPUT, d_sem: int = D_SEM,
                 key_len: int = KEY_LEN, prefix: str = "mix"):
        w_in = np.vstack([np.eye(d_in), np.zeros((key_len, d_in))])
        w_out = np.vstack([np.eye(d_sem), np.zeros((key_len, d_sem))])
        self.in_w = ps.add(f"{prefix}.in.w", w_in)
        self.in_b = ps.add(f"{prefix}.in.b", np.zeros(d_in))
        self.out_w = ps.add(f"{prefix}.out.w", w_out)
        self.out_b = ps.add(f"{prefix}.out.b", np.zeros(d_sem))

    def mix_in(self, xk: Tensor) -> Tensor:
        return affine(xk, self.in_w, self.in_b)

    def mix_out(self, fk: Tensor) -> Tensor:
        return affine(fk, self.out_w, self.out_b)
