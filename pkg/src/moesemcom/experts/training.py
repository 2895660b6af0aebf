"""Expert training loops.

Every trainer is a pure function of (dataset, seed, knobs): streams are
named per trainer, parameters are frozen on completion, and the returned
manifest records the knobs plus per-epoch loss curves.

The robust trainer draws its initial weights from the same stream as the
normal trainer on purpose: starting both codecs from identical parameters
keeps their feature spaces aligned, which is what lets the covert
compressor (fit on normal features) ride on the robust encoder when both
are selected.
"""

from __future__ import annotations

import math

import numpy as np

from ..channel import noise_block
from ..covert import compression_dim
from ..data import DatasetSplit, batches
from ..errors import ConfigError
from ..nn import (
    Adam,
    ParameterSet,
    Tape,
    Tensor,
    add,
    add_const,
    concat_cols,
    mse,
    power_normalize,
    scale,
    softmax_cross_entropy,
    sq_dist,
)
from ..prng import Stream
from .keying import SessionKey, descramble, scramble
from .models import (
    D_SEM,
    KEY_LEN,
    Affine,
    ChannelPair,
    PrivateMixers,
    build_classifier,
    build_semantic_encoder,
)
from .models import CompressorPair as _CompressorPair
from .pipeline import CodecBundle, CodecPipeline, CovertBundle, PrivateBundle
from .registry import COVERT, NORMAL, PRIVATE, ROBUST, TrainedExpert

SUPPORTED_RHOS = (1.0, 1.33, 2.0, 4.0)


def _snr_draw(stream: Stream, lo: float, hi: float) -> float:
    """Integer SNR from the training grid [lo, hi]."""
    return lo + float(stream.integers(1, int(hi - lo) + 1)[0])


def _codec_logits(bundle: CodecBundle, x_t: Tensor, noise: np.ndarray):
    """Full link pass; returns (logits, features, clean symbols)."""
    feats = bundle.encoder(x_t)
    s = power_normalize(bundle.chan.enc(feats))
    r = add_const(s, noise)
    logits = bundle.classifier(bundle.chan.dec(r))
    return logits, feats, s


def train_normal(ds: DatasetSplit, seed: int, *, epochs: int = 20,
                 batch_size: int = 64, lr: float = 1e-3,
                 snr_lo: float = 0.0, snr_hi: float = 12.0) -> TrainedExpert:
    ps = ParameterSet()
    init = Stream.from_root(seed, "codec-init")
    bundle = CodecBundle(
        build_semantic_encoder(ps, init),
        ChannelPair(ps, init, D_SEM),
        build_classifier(ps, init, ds.k),
    )
    shuffle = Stream.from_root(seed, "normal", "shuffle")
    snr_s = Stream.from_root(seed, "normal", "snr")
    noise_s = Stream.from_root(seed, "normal", "noise")
    opt = Adam(ps, lr=lr)
    curve = []
    for _ in range(epochs):
        tot, nb = 0.0, 0
        for idx in batches(len(ds.x_train), batch_size, shuffle):
            snr = _snr_draw(snr_s, snr_lo, snr_hi)
            noise = noise_block(len(idx), D_SEM, snr, noise_s)
            with Tape() as tape:
                logits, _, _ = _codec_logits(bundle, Tensor(ds.x_train[idx]), noise)
                loss = softmax_cross_entropy(logits, ds.y_train[idx])
            ps.zero_grad()
            tape.backward(loss)
            opt.step()
            tot += float(loss.data)
            nb += 1
        curve.append(tot / nb)
    ps.freeze()
    manifest = {
        "kind": NORMAL, "k": ds.k, "seed": seed, "epochs": epochs,
        "batch_size": batch_size, "lr": lr, "snr_range": [snr_lo, snr_hi],
        "loss_per_epoch": curve,
    }
    return TrainedExpert(NORMAL, ps, manifest, bundle)


def _craft_source_pgd(bundle: CodecBundle, x: np.ndarray, y: np.ndarray,
                      snr: float, eps: float, steps: int, step_size: float,
                      noise_stream: Stream) -> np.ndarray:
    """White-box L-inf ascent on the pixel block, no random start, values
    clipped to the image range each step."""
    x_adv = x.copy()
    for _ in range(steps):
        xt = Tensor(x_adv, requires_grad=True)
        noise = noise_block(len(x), D_SEM, snr, noise_stream)
        with Tape() as tape:
            logits, _, _ = _codec_logits(bundle, xt, noise)
            loss = softmax_cross_entropy(logits, y)
        tape.backward(loss)
        x_adv = x_adv + step_size * np.sign(xt.grad)
        np.clip(x_adv, x - eps, x + eps, out=x_adv)
        np.clip(x_adv, 0.0, 1.0, out=x_adv)
    return x_adv


def _craft_channel_pgd(bundle: CodecBundle, s0: np.ndarray, y: np.ndarray,
                       snr: float, eps: float, steps: int,
                       noise_stream: Stream) -> np.ndarray:
    """White-box L2 ascent on the transmitted block. The budget is
    eps * sqrt(m) so eps measures perturbation power against the unit-power
    signal."""
    m = s0.shape[1]
    budget = eps * math.sqrt(m)
    delta = np.zeros_like(s0)
    for _ in range(steps):
        st = Tensor(s0 + delta, requires_grad=True)
        noise = noise_block(len(s0), m, snr, noise_stream)
        with Tape() as tape:
            logits = bundle.classifier(bundle.chan.dec(add_const(st, noise)))
            loss = softmax_cross_entropy(logits, y)
        tape.backward(loss)
        g = st.grad
        gn = np.sqrt(np.einsum("ij,ij->i", g, g))
        delta += (budget / 4.0) * g / np.maximum(gn, 1e-12)[:, None]
        dn = np.sqrt(np.einsum("ij,ij->i", delta, delta))
        delta *= np.minimum(1.0, budget / np.maximum(dn, 1e-12))[:, None]
    return delta


def _craft_covert_chain_pgd(chan: ChannelPair, comp, cls, s0: np.ndarray,
                            y: np.ndarray, snr: float, eps: float,
                            steps: int, noise_stream: Stream) -> np.ndarray:
    """L2 ascent on the narrow block through decompression into the frozen
    carrier head; the same view a channel adversary gets at deploy time."""
    m = s0.shape[1]
    budget = eps * math.sqrt(m)
    delta = np.zeros_like(s0)
    for _ in range(steps):
        st = Tensor(s0 + delta, requires_grad=True)
        noise = noise_block(len(s0), m, snr, noise_stream)
        with Tape() as tape:
            logits = cls(comp.decode(chan.dec(add_const(st, noise))))
            loss = softmax_cross_entropy(logits, y)
        tape.backward(loss)
        g = st.grad
        gn = np.sqrt(np.einsum("ij,ij->i", g, g))
        delta += (budget / 4.0) * g / np.maximum(gn, 1e-12)[:, None]
        dn = np.sqrt(np.einsum("ij,ij->i", delta, delta))
        delta *= np.minimum(1.0, budget / np.maximum(dn, 1e-12))[:, None]
    return delta


def train_robust_sdm(ds: DatasetSplit, seed: int, *, epochs: int = 20,
                     batch_size: int = 64, lr: float = 1e-3,
                     snr_lo: float = 0.0, snr_hi: float = 12.0,
                     eps_src: float = 8.0 / 255.0, steps_src: int = 5,
                     eps_chan: float = 0.5, steps_chan: int = 5,
                     beta: float = 1.0) -> TrainedExpert:
    """Semantic distance minimization: the loss pulls adversarial features
    onto clean features while classifying clean, source-attacked and
    channel-attacked variants. Zero inner steps degenerate to normal
    training."""
    if eps_src <= 0.0 or eps_chan <= 0.0:
        raise ConfigError("adversarial budgets must be positive")
    if steps_src < 0 or steps_chan < 0:
        raise ConfigError("inner step counts cannot be negative")
    ps = ParameterSet()
    init = Stream.from_root(seed, "codec-init")  # same draw as train_normal
    bundle = CodecBundle(
        build_semantic_encoder(ps, init),
        ChannelPair(ps, init, D_SEM),
        build_classifier(ps, init, ds.k),
    )
    shuffle = Stream.from_root(seed, "robust", "shuffle")
    snr_s = Stream.from_root(seed, "robust", "snr")
    noise_s = Stream.from_root(seed, "robust", "noise")
    pgd_src_s = Stream.from_root(seed, "robust", "pgd-src-noise")
    pgd_chan_s = Stream.from_root(seed, "robust", "pgd-chan-noise")
    opt = Adam(ps, lr=lr)
    curve = []
    for _ in range(epochs):
        tot, nb = 0.0, 0
        for idx in batches(len(ds.x_train), batch_size, shuffle):
            x, y = ds.x_train[idx], ds.y_train[idx]
            snr = _snr_draw(snr_s, snr_lo, snr_hi)
            x_adv = _craft_source_pgd(bundle, x, y, snr, eps_src, steps_src,
                                      eps_src / 4.0, pgd_src_s)
            with Tape() as tape:
                s0 = _codec_logits(bundle, Tensor(x), np.zeros((len(x), D_SEM)))[2]
            delta = _craft_channel_pgd(bundle, s0.data, y, snr, eps_chan,
                                       steps_chan, pgd_chan_s)
            n1 = noise_block(len(x), D_SEM, snr, noise_s)
            n2 = noise_block(len(x), D_SEM, snr, noise_s)
            n3 = noise_block(len(x), D_SEM, snr, noise_s)
            with Tape() as tape:
                logits_c, feats_c, s_c = _codec_logits(bundle, Tensor(x), n1)
                logits_a, feats_a, _ = _codec_logits(bundle, Tensor(x_adv), n2)
                r_h = add_const(add_const(s_c, delta), n3)
                logits_h = bundle.classifier(bundle.chan.dec(r_h))
                loss = add(
                    add(softmax_cross_entropy(logits_c, y),
                        softmax_cross_entropy(logits_a, y)),
                    add(softmax_cross_entropy(logits_h, y),
                        scale(sq_dist(feats_c, feats_a), beta)),
                )
            ps.zero_grad()
            tape.backward(loss)
            opt.step()
            tot += float(loss.data)
            nb += 1
        curve.append(tot / nb)
    ps.freeze()
    manifest = {
        "kind": ROBUST, "k": ds.k, "seed": seed, "epochs": epochs,
        "batch_size": batch_size, "lr": lr, "snr_range": [snr_lo, snr_hi],
        "eps_src": eps_src, "steps_src": steps_src, "eps_chan": eps_chan,
        "steps_chan": steps_chan, "beta": beta, "loss_per_epoch": curve,
    }
    return TrainedExpert(ROBUST, ps, manifest, bundle)


def train_private(ds: DatasetSplit, normal_expert: TrainedExpert,
                  secret_seed: int, seed: int, *, epochs: int = 12,
                  batch_size: int = 64, lr: float = 1e-3,
                  snr_lo: float = 0.0, snr_hi: float = 12.0,
                  identity_weight: float = 64.0) -> TrainedExpert:
    """Adversarial key training around the frozen normal codec.

    Alternating steps: the legitimate pass trains the key mixers through
    the full keyed link; the eavesdropper pass trains a keyless clone of
    the receiver on the symbols it can observe. Mixer updates never see the
    eavesdropper loss; the point of logging its curve is to show that it
    stays near chance while the legitimate loss converges.

    The identity anchor pins both mixers to the transparent solution on
    their data blocks. The cross-entropy valley is flat there, and the
    transparent point is the one that stays compatible with any carrier
    codec: block scrambling is orthogonal, so a transparent stack hands a
    white-box channel adversary exactly the carrier's own attack surface
    and no more.
    """
    carrier = normal_expert.model
    carrier_ps = normal_expert.params
    ps = ParameterSet()
    mixers = PrivateMixers(ps, Stream.from_root(seed, "private-init"))
    bundlep = PrivateBundle(mixers, secret_seed, KEY_LEN)
    pipe = CodecPipeline(ds.k, carrier, private=bundlep)

    ps_e = ParameterSet()
    eaves_init = Stream.from_root(seed, "private", "eaves-init")
    eaves_dec = Affine(ps_e, "edec", D_SEM, D_SEM, eaves_init, "near_identity")
    eaves_cls = build_classifier(ps_e, eaves_init, ds.k, prefix="ecls")

    shuffle = Stream.from_root(seed, "private", "shuffle")
    snr_s = Stream.from_root(seed, "private", "snr")
    noise_s = Stream.from_root(seed, "private", "noise")
    opt = Adam(ps, lr=lr)
    opt_e = Adam(ps_e, lr=lr)
    n_train = len(ds.x_train)
    legit_curve, eaves_curve = [], []
    for ep in range(epochs):
        tot_l = tot_e = 0.0
        nb = 0
        for idx in batches(n_train, batch_size, shuffle):
            msg_idx = ep * n_train + idx
            x, y = ds.x_train[idx], ds.y_train[idx]
            snr = _snr_draw(snr_s, snr_lo, snr_hi)
            noise = noise_block(len(idx), D_SEM, snr, noise_s)
            key = pipe.session_key
            sp = key.scramble_params(msg_idx, D_SEM)
            with Tape() as tape:
                keys_t = Tensor(key.keys_for(msg_idx))
                xm = mixers.mix_in(concat_cols(Tensor(x), keys_t))
                feats = carrier.encoder(xm)
                sym = scramble(power_normalize(carrier.chan.enc(feats)), sp)
                f = carrier.chan.dec(descramble(add_const(sym, noise), sp))
                fo = mixers.mix_out(concat_cols(f, keys_t))
                ce = softmax_cross_entropy(carrier.classifier(fo), y)
                loss_l = add(ce, scale(add(mse(xm, Tensor(x)),
                                           mse(fo, Tensor(f.data))),
                                       identity_weight))
            ps.zero_grad()
            carrier_ps.zero_grad()
            tape.backward(loss_l)
            opt.step()

            with Tape() as tape_e:
                f_e = eaves_dec(Tensor(sym.data))
                loss_e = softmax_cross_entropy(eaves_cls(f_e), y)
            ps_e.zero_grad()
            tape_e.backward(loss_e)
            opt_e.step()
            tot_l += float(ce.data)
            tot_e += float(loss_e.data)
            nb += 1
        legit_curve.append(tot_l / nb)
        eaves_curve.append(tot_e / nb)
    ps.freeze()
    manifest = {
        "kind": PRIVATE, "k": ds.k, "seed": seed, "secret_seed": secret_seed,
        "key_len": KEY_LEN, "epochs": epochs, "batch_size": batch_size,
        "lr": lr, "snr_range": [snr_lo, snr_hi],
        "identity_weight": identity_weight,
        "legit_loss_per_epoch": legit_curve,
        "eaves_loss_per_epoch": eaves_curve,
    }
    return TrainedExpert(PRIVATE, ps, manifest, bundlep)


def train_covert_compressor(ds: DatasetSplit, normal_expert: TrainedExpert,
                            rho: float, seed: int, *, epochs_auto: int = 200,
                            epochs_chan: int = 60, batch_size: int = 64,
                            lr: float = 1e-3, snr_lo: float = 0.0,
                            snr_hi: float = 12.0, eps_chan: float = 0.5,
                            steps_chan: int = 10) -> TrainedExpert:
    """Two-phase covert codec fit on frozen normal features.

    Phase one trains the affine down/up pair on reconstruction alone; phase
    two trains a compressed-width channel codec through the noisy channel,
    splitting each batch between plain noise and a worst-case block
    perturbation so the narrow link survives channel tampering too.
    """
    if rho not in SUPPORTED_RHOS:
        raise ConfigError(f"rho must be one of {SUPPORTED_RHOS}, got {rho:g}")
    d_prime = compression_dim(D_SEM, rho)
    bundle = normal_expert.model

    feats_train = bundle.encoder(Tensor(ds.x_train)).data
    feats_test = bundle.encoder(Tensor(ds.x_test)).data

    ps = ParameterSet()
    init = Stream.from_root(seed, "covert-init", f"{rho:g}")
    comp = _CompressorPair(ps, init, D_SEM, d_prime)
    chan = ChannelPair(ps, init, d_prime)
    shuffle = Stream.from_root(seed, "covert", f"{rho:g}", "shuffle")
    snr_s = Stream.from_root(seed, "covert", f"{rho:g}", "snr")
    noise_s = Stream.from_root(seed, "covert", f"{rho:g}", "noise")
    opt = Adam(ps, lr=lr)

    auto_curve = []
    for _ in range(epochs_auto):
        tot, nb = 0.0, 0
        for idx in batches(len(feats_train), batch_size, shuffle):
            ft = Tensor(feats_train[idx])
            with Tape() as tape:
                loss = mse(comp.decode(comp.encode(ft)), ft)
            ps.zero_grad()
            tape.backward(loss)
            opt.step()
            tot += float(loss.data)
            nb += 1
        auto_curve.append(tot / nb)

    z_train = comp.encode(Tensor(feats_train)).data
    cls = bundle.classifier  # frozen carrier head, gradient source only
    pgd_s = Stream.from_root(seed, "covert", f"{rho:g}", "pgd-chan-noise")
    chan_curve = []
    for _ in range(epochs_chan):
        tot, nb = 0.0, 0
        for idx in batches(len(z_train), batch_size, shuffle):
            zt = Tensor(z_train[idx])
            yb = ds.y_train[idx]
            snr = _snr_draw(snr_s, snr_lo, snr_hi)
            with Tape() as tape:
                s0 = power_normalize(chan.enc(zt))
            delta = _craft_covert_chain_pgd(chan, comp, cls, s0.data, yb,
                                            snr, eps_chan, steps_chan, pgd_s)
            n1 = noise_block(len(idx), d_prime, snr, noise_s)
            n2 = noise_block(len(idx), d_prime, snr, noise_s)
            with Tape() as tape:
                s = power_normalize(chan.enc(zt))
                zh = chan.dec(add_const(s, n1))
                zh_adv = chan.dec(add_const(add_const(s, delta), n2))
                f_adv = comp.decode(zh_adv)
                loss = add(add(mse(zh, zt), mse(zh_adv, zt)),
                           add(softmax_cross_entropy(cls(f_adv), yb),
                               sq_dist(f_adv, Tensor(feats_train[idx]))))
            ps.zero_grad()
            tape.backward(loss)
            for name, t in ps.items():
                if name.startswith("comp."):
                    t.grad = None  # phase two may not move the compressor
            opt.step()
            tot += float(loss.data)
            nb += 1
        chan_curve.append(tot / nb)
    ps.freeze()

    def recon_mse(f):
        return float(mse(comp.decode(comp.encode(Tensor(f))), Tensor(f)).data)

    manifest = {
        "kind": COVERT, "k": ds.k, "seed": seed, "rho": rho,
        "d_prime": d_prime, "epochs_auto": epochs_auto,
        "epochs_chan": epochs_chan, "batch_size": batch_size, "lr": lr,
        "snr_range": [snr_lo, snr_hi], "eps_chan": eps_chan,
        "steps_chan": steps_chan,
        "recon_mse_train": recon_mse(feats_train),
        "recon_mse_test": recon_mse(feats_test),
        "auto_loss_per_epoch": auto_curve[:: max(1, len(auto_curve) // 20)],
        "chan_loss_per_epoch": chan_curve[:: max(1, len(chan_curve) // 20)],
    }
    return TrainedExpert(COVERT, ps, manifest,
                         CovertBundle(comp, chan, rho, d_prime))
