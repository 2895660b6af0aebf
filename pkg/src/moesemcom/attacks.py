"""Tampering attacks, eavesdropper training, and attacked evaluation.

Source attacks perturb pixels before encoding (L-inf budget, image range
respected); channel attacks add a power-bounded block to the transmitted
symbols (L2 budget of eps * sqrt(m) per block). White-box attackers get
gradients through the complete receiver, including any descrambling, which
is the strongest consistent attacker. The black-box variant only calls a
posterior oracle under a query budget.

Every crafting function checks its own budget before returning, so a
violation is an assertion failure rather than a silently easier attack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .channel import noise_block
from .errors import ConfigError
from .experts.keying import SessionKey, descramble
from .experts.models import D_SEM, Affine, build_classifier
from .experts.pipeline import CodecPipeline, softmax_np
from .nn import (
    Adam,
    ParameterSet,
    Tape,
    Tensor,
    add_const,
    concat_cols,
    softmax_cross_entropy,
)
from .prng import Stream


@dataclass(frozen=True)
class AttackSpec:
    surface: str               # "source" | "channel"
    mode: str = "whitebox"     # "whitebox" | "blackbox"
    epsilon: float = 8.0 / 255.0
    steps: int = 10
    step_size: Optional[float] = None  # defaults to epsilon / 4
    query_budget: int = 0              # blackbox only
    seed: int = 0

    def __post_init__(self):
        if self.surface not in ("source", "channel"):
            raise ConfigError(f"unknown attack surface: {self.surface}")
        if self.mode not in ("whitebox", "blackbox"):
            raise ConfigError(f"unknown attack mode: {self.mode}")
        if self.surface == "channel" and self.mode == "blackbox":
            raise ConfigError("black-box attacks are source-side only")
        if self.epsilon <= 0.0:
            raise ConfigError("attack budget must be positive")
        if self.steps < 0 or self.query_budget < 0:
            raise ConfigError("steps and query budget cannot be negative")

    @property
    def effective_step(self) -> float:
        return self.epsilon / 4.0 if self.step_size is None else self.step_size


def pgd_source(pipeline: CodecPipeline, x: np.ndarray, y: np.ndarray,
               spec: AttackSpec, snr_db: float, noise_stream: Stream,
               indices=None) -> np.ndarray:
    """Deterministic L-inf PGD on pixels through the full link. No random
    start; channel noise is redrawn per step from the attacker's stream."""
    x_adv = x.copy()
    m = pipeline.symbol_dim
    for _ in range(spec.steps):
        xt = Tensor(x_adv, requires_grad=True)
        noise = noise_block(len(x), m, snr_db, noise_stream)
        with Tape() as tape:
            sym = pipeline.transmit(xt, indices)
            logits = pipeline.receive(add_const(sym, noise), indices)
            loss = softmax_cross_entropy(logits, y)
        tape.backward(loss)
        x_adv = x_adv + spec.effective_step * np.sign(xt.grad)
        np.clip(x_adv, x - spec.epsilon, x + spec.epsilon, out=x_adv)
        np.clip(x_adv, 0.0, 1.0, out=x_adv)
    assert float(np.abs(x_adv - x).max()) <= spec.epsilon + 1e-9
    return x_adv


def pgd_channel(pipeline: CodecPipeline, symbols: np.ndarray, y: np.ndarray,
                spec: AttackSpec, snr_db: float, noise_stream: Stream,
                indices=None) -> np.ndarray:
    """L2 PGD on the transmitted block; returns the additive perturbation."""
    m = symbols.shape[1]
    budget = spec.epsilon * math.sqrt(m)
    delta = np.zeros_like(symbols)
    for _ in range(spec.steps):
        st = Tensor(symbols + delta, requires_grad=True)
        noise = noise_block(len(symbols), m, snr_db, noise_stream)
        with Tape() as tape:
            logits = pipeline.receive(add_const(st, noise), indices)
            loss = softmax_cross_entropy(logits, y)
        tape.backward(loss)
        g = st.grad
        gn = np.sqrt(np.einsum("ij,ij->i", g, g))
        delta += (budget / 4.0) * g / np.maximum(gn, 1e-12)[:, None]
        dn = np.sqrt(np.einsum("ij,ij->i", delta, delta))
        delta *= np.minimum(1.0, budget / np.maximum(dn, 1e-12))[:, None]
    dn = np.sqrt(np.einsum("ij,ij->i", delta, delta))
    assert float(dn.max()) <= budget * (1.0 + 1e-9)
    return delta


def blackbox_source(oracle: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                    y: np.ndarray, spec: AttackSpec) -> np.ndarray:
    """Random sign search under a per-sample oracle query budget.

    Each iteration proposes x + eps * random signs, keeps the proposal for
    the samples whose true-class posterior dropped. Including the initial
    scoring call, the oracle sees at most query_budget batched calls."""
    if spec.query_budget == 0:
        return x.copy()
    rng = Stream.from_root(spec.seed, "blackbox")
    rows = np.arange(len(x))

    def true_prob(xq):
        return oracle(xq)[rows, y]

    x_best = x.copy()
    best = true_prob(x_best)
    for _ in range(spec.query_budget - 1):
        signs = rng.signs(x.size).reshape(x.shape)
        cand = np.clip(np.clip(x + spec.epsilon * signs, 0.0, 1.0),
                       x - spec.epsilon, x + spec.epsilon)
        p = true_prob(cand)
        better = p < best
        x_best[better] = cand[better]
        best = np.minimum(best, p)
    assert float(np.abs(x_best - x).max()) <= spec.epsilon + 1e-9
    return x_best


class Eavesdropper:
    """Receiver clone trained on observed symbol traffic. Without the
    session secret it sees scrambled blocks; with it (negative control) it
    descrambles and key-mixes exactly like the legitimate receiver."""

    def __init__(self, k: int, d: int, seed: int,
                 session_key: Optional[SessionKey] = None):
        self.k = k
        self.d = d
        self.session_key = session_key
        self.params = ParameterSet()
        init = Stream.from_root(seed, "eaves-init")
        # narrow taps (compressed traffic) get lifted back to feature width
        gain = "near_identity" if d == D_SEM else "linear"
        self._dec = Affine(self.params, "dec", d, D_SEM, init, gain)
        if session_key is not None:
            key_len = session_key.key_len
            w = np.vstack([np.eye(D_SEM),
                           init.normal(key_len * D_SEM, sigma=0.05)
                           .reshape(key_len, D_SEM)])
            self._mix_w = self.params.add("mix.w", w)
            self._mix_b = self.params.add("mix.b", np.zeros(D_SEM))
        self._cls = build_classifier(self.params, init, k)

    def logits(self, symbols: Tensor, indices=None) -> Tensor:
        t = symbols
        if self.session_key is not None:
            if indices is None:
                raise ConfigError("keyed eavesdropper needs message indices")
            idx = np.asarray(indices, dtype=np.int64)
            t = descramble(t, self.session_key.scramble_params(idx, self.d))
        f = self._dec(t)
        if self.session_key is not None:
            from .nn import affine

            keys = self.session_key.keys_for(idx)
            f = affine(concat_cols(f, Tensor(keys)), self._mix_w, self._mix_b)
        return self._cls(f)

    def posteriors(self, symbols: np.ndarray, indices=None) -> np.ndarray:
        return softmax_np(self.logits(Tensor(symbols), indices).data)

    def accuracy(self, symbols: np.ndarray, y: np.ndarray, indices=None) -> float:
        return float((self.posteriors(symbols, indices).argmax(axis=1) == y).mean())


def train_eavesdropper(traffic: np.ndarray, labels: np.ndarray, k: int,
                       seed: int, *, session_key: Optional[SessionKey] = None,
                       indices=None, epochs: int = 30, batch_size: int = 64,
                       lr: float = 1e-3) -> Eavesdropper:
    """Fit an eavesdropper on captured (symbols, label) pairs. Traffic is
    the sender's emission before channel noise, the most generous tap."""
    if len(traffic) == 0:
        raise ConfigError("cannot train an eavesdropper on empty traffic")
    if session_key is not None and indices is None:
        raise ConfigError("keyed eavesdropper training needs message indices")
    eaves = Eavesdropper(k, traffic.shape[1], seed, session_key)
    opt = Adam(eaves.params, lr=lr)
    shuffle = Stream.from_root(seed, "eaves", "shuffle")
    from .data import batches

    for _ in range(epochs):
        for idx in batches(len(traffic), batch_size, shuffle):
            bidx = None if indices is None else np.asarray(indices)[idx]
            with Tape() as tape:
                lg = eaves.logits(Tensor(traffic[idx]), bidx)
                loss = softmax_cross_entropy(lg, labels[idx])
            eaves.params.zero_grad()
            tape.backward(loss)
            opt.step()
    return eaves


def evaluate_under_attack(pipeline: CodecPipeline, x: np.ndarray,
                          y: np.ndarray, snr_db: float, *,
                          spec: Optional[AttackSpec] = None,
                          noise_stream: Stream, indices=None,
                          eaves: Optional[Eavesdropper] = None,
                          batch: int = 250) -> dict:
    """Accuracy of the link at one SNR under an optional attack, plus the
    eavesdropper's accuracy on the emitted traffic if one is listening."""
    hits = 0
    eaves_hits = 0
    attacker = None
    if spec is not None:
        attacker = Stream.from_root(spec.seed, "attack", spec.surface, int(snr_db))
    for lo in range(0, len(x), batch):
        hi = min(lo + batch, len(x))
        xb, yb = x[lo:hi], y[lo:hi]
        bidx = None if indices is None else indices[lo:hi]

        if spec is not None and spec.surface == "source":
            if spec.mode == "whitebox":
                xb = pgd_source(pipeline, xb, yb, spec, snr_db,
                                attacker.child("craft", lo), bidx)
            else:
                oracle_noise = attacker.child("oracle-noise", lo)

                def oracle(xq):
                    return pipeline.posteriors(xq, snr_db, oracle_noise, bidx)

                xb = blackbox_source(oracle, xb, yb, spec)

        sent = pipeline.encode(xb, bidx)
        if eaves is not None:
            eaves_hits += int((eaves.posteriors(sent, bidx).argmax(axis=1)
                               == yb).sum())
        received = sent
        if spec is not None and spec.surface == "channel":
            received = sent + pgd_channel(pipeline, sent, yb, spec, snr_db,
                                          attacker.child("craft", lo), bidx)
        received = received + noise_block(len(xb), sent.shape[1], snr_db,
                                          noise_stream)
        post = pipeline.decode(received, bidx)
        hits += int((post.argmax(axis=1) == yb).sum())
    out = {"accuracy": hits / len(x)}
    if eaves is not None:
        out["eaves_accuracy"] = eaves_hits / len(x)
    return out
