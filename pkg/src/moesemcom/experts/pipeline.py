"""Transmit/receive pipelines assembled from trained experts.

Stage order is fixed regardless of which experts are active:

    [key mix-in] -> semantic encode -> [covert compress] -> channel encode
    -> power normalize -> [key scramble]   ... channel ...
    [descramble] -> channel decode -> [decompress] -> [key mix-out]
    -> classify

The channel codec width follows the innermost representation: a covert
pipeline uses the compressed-width pair bundled with the covert expert, any
other pipeline uses the 32-wide pair of its codec.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..channel import apply_awgn
from ..errors import ConfigError
from ..nn import Tensor, concat_cols, power_normalize
from ..prng import Stream
from .keying import SessionKey, descramble, scramble
from .models import ChannelPair, CompressorPair, Mlp, PrivateMixers
from .registry import COVERT, NORMAL, PRIVATE, ROBUST, ExpertRegistry


@dataclass
class CodecBundle:
    encoder: Mlp
    chan: ChannelPair
    classifier: Mlp


@dataclass
class CovertBundle:
    comp: CompressorPair
    chan: ChannelPair
    rho: float
    d_prime: int


@dataclass
class PrivateBundle:
    mixers: PrivateMixers
    secret_seed: int
    key_len: int


def softmax_np(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


class CodecPipeline:
    def __init__(self, k: int, codec: CodecBundle,
                 covert: Optional[CovertBundle] = None,
                 private: Optional[PrivateBundle] = None,
                 session_key: Optional[SessionKey] = None):
        self.k = k
        self.codec = codec
        self.covert = covert
        self.private = private
        if private is not None and session_key is None:
            session_key = SessionKey(private.secret_seed, private.key_len)
        self.session_key = session_key

    @property
    def symbol_dim(self) -> int:
        return self.covert.d_prime if self.covert else self.codec.chan.d

    def _indices(self, indices, n: int) -> Optional[np.ndarray]:
        if self.private is None:
            return None
        if indices is None:
            raise ConfigError("private transmission needs message indices")
        idx = np.asarray(indices, dtype=np.int64)
        if idx.shape != (n,):
            raise ConfigError("message indices must match the batch")
        return idx

    def transmit(self, x, indices=None) -> Tensor:
        """Images (or an image Tensor) to power-normalized symbols."""
        t = x if isinstance(x, Tensor) else Tensor(x)
        idx = self._indices(indices, t.data.shape[0])
        if self.private is not None:
            keys = self.session_key.keys_for(idx)
            t = self.private.mixers.mix_in(concat_cols(t, Tensor(keys)))
        feats = self.codec.encoder(t)
        z = self.covert.comp.encode(feats) if self.covert else feats
        chan = self.covert.chan if self.covert else self.codec.chan
        s = power_normalize(chan.enc(z))
        if self.private is not None:
            s = scramble(s, self.session_key.scramble_params(idx, s.data.shape[1]))
        return s

    def receive(self, y, indices=None) -> Tensor:
        """Noisy symbols to class logits."""
        t = y if isinstance(y, Tensor) else Tensor(y)
        idx = self._indices(indices, t.data.shape[0])
        if self.private is not None:
            t = descramble(t, self.session_key.scramble_params(idx, t.data.shape[1]))
        chan = self.covert.chan if self.covert else self.codec.chan
        z = chan.dec(t)
        f = self.covert.comp.decode(z) if self.covert else z
        if self.private is not None:
            keys = self.session_key.keys_for(idx)
            f = self.private.mixers.mix_out(concat_cols(f, Tensor(keys)))
        return self.codec.classifier(f)

    def encode(self, x: np.ndarray, indices=None) -> np.ndarray:
        return self.transmit(x, indices).data

    def decode(self, y: np.ndarray, indices=None) -> np.ndarray:
        return softmax_np(self.receive(y, indices).data)

    def posteriors(self, x: np.ndarray, snr_db: float, noise_stream: Stream,
                   indices=None) -> np.ndarray:
        sent = self.encode(x, indices)
        return self.decode(apply_awgn(sent, snr_db, noise_stream), indices)


def accuracy(pipeline: CodecPipeline, x: np.ndarray, y: np.ndarray,
             snr_db: float, noise_stream: Stream, indices=None,
             batch: int = 256) -> float:
    """Clean-link classification accuracy at one SNR."""
    hits = 0
    for lo in range(0, len(x), batch):
        hi = min(lo + batch, len(x))
        idx = None if indices is None else indices[lo:hi]
        post = pipeline.posteriors(x[lo:hi], snr_db, noise_stream, idx)
        hits += int((post.argmax(axis=1) == y[lo:hi]).sum())
    return hits / len(x)


def compose_pipeline(registry: ExpertRegistry, kinds, rho: Optional[float] = None,
                     session_key: Optional[SessionKey] = None) -> CodecPipeline:
    """Build the pipeline for a set of selected expert kinds.

    Missing experts surface as MissingExpertError before any evaluation.
    Kinds outside the four pipeline stages are rejected: an extension kind
    has no slot in the fixed stage order.
    """
    kindset = set(kinds)
    unknown = kindset - {NORMAL, ROBUST, PRIVATE, COVERT}
    if unknown:
        raise ConfigError(f"no pipeline stage for expert kinds: {sorted(unknown)}")
    codec_exp = registry.get(ROBUST) if ROBUST in kindset else registry.get(NORMAL)
    covert_b = None
    if COVERT in kindset:
        if rho is None:
            raise ConfigError("covert pipeline needs a compression ratio")
        covert_b = registry.get(COVERT, rho).model
    private_b = registry.get(PRIVATE).model if PRIVATE in kindset else None
    return CodecPipeline(registry.k, codec_exp.model, covert_b, private_b,
                         session_key)
