"""Full-scale acceptance suite.

One test per shipped guarantee, numbered, each ending in a single printed
verdict line (visible in captured output) plus the matching assertions.
The heavy fixtures train every expert once at the default configuration
and all later criteria read from that one stack.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from moesemcom.attacks import evaluate_under_attack
from moesemcom.channel import apply_awgn, empirical_snr_db, noise_block
from moesemcom.checkpoint import load_checkpoint, restore, save_checkpoint
from moesemcom.config import SimConfig
from moesemcom.covert import (
    compression_dim,
    detection_free_prob,
    detection_opportunities,
    dfp_for_dim,
    mc_detection_free,
    payload_bits,
    transmission_time,
)
from moesemcom.data import make_dataset
from moesemcom.errors import CheckpointError
from moesemcom.experts.keying import SessionKey, scramble
from moesemcom.experts.models import (
    D_INPUT,
    D_SEM,
    KEY_LEN,
    Affine,
    ChannelPair,
    CompressorPair,
    PrivateMixers,
    build_classifier,
    build_semantic_encoder,
)
from moesemcom.experts.pipeline import compose_pipeline
from moesemcom.experts.registry import ExpertRegistry, NORMAL
from moesemcom.experts.training import (
    train_covert_compressor,
    train_normal,
    train_private,
    train_robust_sdm,
)
from moesemcom.gating import (
    GateModel,
    RHO_GRID,
    enumerate_requirement_grid,
    exact_match_rate,
    train_gate,
)
from moesemcom.nn import (
    ParameterSet,
    Tensor,
    add,
    add_const,
    affine,
    bce_with_logits,
    concat_cols,
    grad_check,
    mse,
    power_normalize,
    scale,
    sigmoid,
    softmax_cross_entropy,
    sum_all,
)
from moesemcom.prng import Stream
from moesemcom.scenarios import SCENARIOS, run_scenario

SNR_EVAL = 12.0


def _verdict(num: int, name: str, ok: bool, detail: str = ""):
    print(f"CRITERION {num:02d} {name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


@pytest.fixture(scope="module")
def cfg():
    return SimConfig.from_dict({})


@pytest.fixture(scope="module")
def ds(cfg):
    d = cfg.dataset
    return make_dataset(k=d["k"], n_train=d["n_train"], n_test=d["n_test"],
                        seed=cfg.seed)


@pytest.fixture(scope="module")
def stack(cfg, ds):
    """Every expert plus the gate, trained once at the default knobs."""
    tr = cfg.training
    reg = ExpertRegistry(k=ds.k)

    t0 = time.monotonic()
    normal = train_normal(ds, cfg.seed, epochs=tr["epochs_normal"],
                          batch_size=tr["batch_size"], lr=tr["lr"])
    normal_seconds = time.monotonic() - t0
    reg.register(normal)

    reg.register(train_robust_sdm(ds, cfg.seed, epochs=tr["epochs_robust"],
                                  batch_size=tr["batch_size"], lr=tr["lr"]))
    secret = Stream.from_root(cfg.seed, "private-secret").seed
    reg.register(train_private(ds, normal, secret, cfg.seed,
                               epochs=tr["epochs_private"],
                               batch_size=tr["batch_size"], lr=tr["lr"]))
    for rho in RHO_GRID:
        reg.register(train_covert_compressor(
            ds, normal, rho, cfg.seed,
            epochs_auto=tr["epochs_covert_auto"],
            epochs_chan=tr["epochs_covert_chan"],
            batch_size=tr["batch_size"], lr=tr["lr"]))

    hashes_before_gate = reg.hashes()
    gate = train_gate(GateModel.build(cfg.seed), reg, ds.x_train,
                      n_samples=tr["gate_samples"], lam=tr["gate_lambda"],
                      seed=cfg.seed, epochs=tr["gate_epochs"],
                      batch_size=tr["batch_size"], lr=tr["gate_lr"])
    hashes_after_gate = reg.hashes()
    return {"reg": reg, "gate": gate, "normal_seconds": normal_seconds,
            "hashes": (hashes_before_gate, hashes_after_gate)}


@pytest.fixture(scope="module")
def rows(cfg, ds, stack):
    return {sid: run_scenario(sid, cfg, ds, stack["reg"], stack["gate"])
            for sid in sorted(SCENARIOS)}


def _acc(rows_list, label, snr=None, metric="accuracy"):
    vs = [r.value for r in rows_list
          if r.expert_set == label and r.metric == metric
          and (snr is None or r.snr_db == snr)]
    assert vs, (label, metric, snr)
    return vs if snr is None else vs[0]


def _moe_label(rows_list):
    labels = {r.expert_set for r in rows_list} - {"normal"}
    assert len(labels) == 1, labels
    return labels.pop()


# ----------------------------------------------------- 1: gradient checks


def _arch_codec(seed):
    """Transmit chain: encoder -> channel codec -> AWGN -> classifier."""
    ps = ParameterSet()
    init = Stream.from_root(seed, "gc", "codec")
    enc = build_semantic_encoder(ps, init)
    cls = build_classifier(ps, init, 8)
    chan = ChannelPair(ps, init, D_SEM)
    data = Stream.from_root(seed, "gc", "codec-data")
    x = data.normal(4 * D_INPUT).reshape(4, D_INPUT)
    y = data.integers(4, 8)
    noise = noise_block(4, D_SEM, 6.0, data)

    def loss_fn():
        s = power_normalize(chan.enc(enc(Tensor(x))))
        return softmax_cross_entropy(cls(chan.dec(add_const(s, noise))), y)

    return ps, loss_fn


def _arch_compressor(seed):
    """Covert bottleneck: compress -> narrow channel codec -> reconstruct."""
    ps = ParameterSet()
    init = Stream.from_root(seed, "gc", "comp")
    comp = CompressorPair(ps, init, D_SEM, 16)
    chan = ChannelPair(ps, init, 16, prefix="cchan")
    data = Stream.from_root(seed, "gc", "comp-data")
    f = data.normal(4 * D_SEM).reshape(4, D_SEM)
    noise = noise_block(4, 16, 6.0, data)

    def loss_fn():
        s = power_normalize(chan.enc(comp.encode(Tensor(f))))
        return mse(comp.decode(chan.dec(add_const(s, noise))), Tensor(f))

    return ps, loss_fn


def _arch_private(seed):
    """Keyed chain: key mix-in, carrier codec, scrambled symbols, mix-out."""
    ps = ParameterSet()
    init = Stream.from_root(seed, "gc", "priv")
    enc = build_semantic_encoder(ps, init)
    cls = build_classifier(ps, init, 8)
    chan = ChannelPair(ps, init, D_SEM)
    mixers = PrivateMixers(ps, init)
    key = SessionKey(Stream.from_root(seed, "gc", "secret").seed, KEY_LEN)
    data = Stream.from_root(seed, "gc", "priv-data")
    x = data.normal(4 * D_INPUT).reshape(4, D_INPUT)
    y = data.integers(4, 8)
    idx = np.arange(4)
    keys = key.keys_for(idx)
    sp = key.scramble_params(idx, D_SEM)
    noise = noise_block(4, D_SEM, 6.0, data)

    def loss_fn():
        xm = mixers.mix_in(concat_cols(Tensor(x), Tensor(keys)))
        sym = scramble(power_normalize(chan.enc(enc(xm))), sp)
        f = chan.dec(add_const(sym, noise))
        fo = mixers.mix_out(concat_cols(f, Tensor(keys)))
        return softmax_cross_entropy(cls(fo), y)

    return ps, loss_fn


def _arch_gate(seed):
    """Requirement scorer with its sparsity penalty."""
    gate = GateModel.build(seed)
    data = Stream.from_root(seed, "gc", "gate-data")
    feats = data.uniform(4 * 20).reshape(4, 20)
    targets = (data.uniform(4 * 4).reshape(4, 4) > 0.5).astype(float)

    def loss_fn():
        logits = gate.forward(Tensor(feats))
        pen = scale(sum_all(sigmoid(logits)), 0.01 / 4)
        return add(bce_with_logits(logits, targets), pen)

    return gate.params, loss_fn


def _arch_eaves(seed):
    """Keyed receiver clone: lift, descramble-free mix, classify."""
    ps = ParameterSet()
    init = Stream.from_root(seed, "gc", "eaves")
    dec = Affine(ps, "dec", 16, D_SEM, init, "linear")
    cls = build_classifier(ps, init, 8)
    mix_w = ps.add("mix.w", np.vstack([
        np.eye(D_SEM),
        init.normal(KEY_LEN * D_SEM, sigma=0.05).reshape(KEY_LEN, D_SEM)]))
    mix_b = ps.add("mix.b", np.zeros(D_SEM))
    data = Stream.from_root(seed, "gc", "eaves-data")
    s = data.normal(4 * 16).reshape(4, 16)
    keys = data.normal(4 * KEY_LEN).reshape(4, KEY_LEN)
    y = data.integers(4, 8)

    def loss_fn():
        f = affine(concat_cols(dec(Tensor(s)), Tensor(keys)), mix_w, mix_b)
        return softmax_cross_entropy(cls(f), y)

    return ps, loss_fn


def test_criterion_01_gradient_fidelity():
    archs = {"codec": _arch_codec, "compressor": _arch_compressor,
             "private": _arch_private, "gate": _arch_gate,
             "eavesdropper": _arch_eaves}
    t0 = time.monotonic()
    worst = 0.0
    for seed in range(10):
        for name, build in archs.items():
            ps, loss_fn = build(seed)
            coords = Stream.from_root(seed, "gc", name, "coords")
            err = grad_check(loss_fn, ps.tensors(), coords,
                             coords_per_tensor=3)
            worst = max(worst, err)
    elapsed = time.monotonic() - t0
    ok = worst < 1e-4 and elapsed < 60.0
    _verdict(1, "gradient fidelity", ok,
             f"(worst rel err {worst:.2e}, {elapsed:.1f}s, "
             f"{len(archs)} architectures x 10 seeds)")


# -------------------------------------------------- 2: channel calibration


def test_criterion_02_channel_calibration():
    worst = 0.0
    for snr in (0.0, 3.0, 6.0, 9.0, 12.0):
        stream = Stream.from_root(0, "cal", f"{snr:g}")
        sent = stream.normal(100_000).reshape(2000, 50)
        received = apply_awgn(sent, snr, stream.child("noise"))
        worst = max(worst, abs(empirical_snr_db(sent, received) - snr))
    ok = worst < 0.1
    _verdict(2, "channel calibration", ok,
             f"(worst deviation {worst:.4f} dB over 1e5 symbols per point)")


# ------------------------------------------------------- 3: baseline task


def test_criterion_03_baseline_task(cfg, ds, stack):
    t0 = time.monotonic()
    pipe = compose_pipeline(stack["reg"], [NORMAL])
    accs = []
    for snr in cfg.snr_grid:
        noise = Stream.from_root(cfg.seed, "accept", "clean", f"{snr:g}")
        res = evaluate_under_attack(pipe, ds.x_test[:cfg.eval_samples],
                                    ds.y_test[:cfg.eval_samples], snr,
                                    noise_stream=noise)
        accs.append(res["accuracy"])
    eval_seconds = time.monotonic() - t0
    total = stack["normal_seconds"] + eval_seconds
    monotone = all(b >= a - 0.02 for a, b in zip(accs, accs[1:]))
    ok = accs[-1] >= 0.90 and monotone and total < 300.0
    _verdict(3, "baseline task", ok,
             f"(clean accuracy {accs}, train+eval {total:.0f}s)")


# -------------------------------------------- 4: source attack, both codecs


def test_criterion_04_source_pgd_gap(cfg, rows):
    a = rows["a"]
    moe = _moe_label(a)
    ok = True
    gaps = []
    for snr in cfg.snr_grid:
        base = _acc(a, "normal", snr)
        hard = _acc(a, moe, snr)
        gaps.append(round(hard - base, 3))
        ok = ok and base <= 0.5 and hard >= base + 0.2
    _verdict(4, "source attack defense", ok,
             f"(robust-normal gaps per SNR {gaps})")


# ------------------------------------------- 5: channel attack, both codecs


def test_criterion_05_channel_pgd(cfg, rows):
    b = rows["b"]
    moe = _moe_label(b)
    base12 = _acc(b, "normal", SNR_EVAL)
    hard = [_acc(b, moe, snr) for snr in cfg.snr_grid]
    monotone = all(y >= x - 0.02 for x, y in zip(hard, hard[1:]))
    ok = base12 <= 0.6 and all(v >= 0.7 for v in hard) and monotone
    _verdict(5, "channel attack defense", ok,
             f"(normal@12 {base12:.3f}, robust {hard})")


# --------------------------------------------------------- 6: warden model


def test_criterion_06_warden_detection(cfg, rows):
    budget = cfg.covert_budget()
    c = rows["c"]
    dfp_rows = {r.expert_set: r.value for r in c
                if r.metric == "dfp" and r.expert_set != "normal"}
    accs = []
    ok = True
    last_dfp = 0.0
    for rho in sorted(RHO_GRID):
        label = f"moe:rho={rho:g}"
        d = compression_dim(D_SEM, rho)
        analytic = dfp_for_dim(d, budget)
        ok = ok and abs(dfp_rows[label] - analytic) < 1e-12
        ok = ok and analytic > last_dfp
        last_dfp = analytic

        looks = detection_opportunities(
            transmission_time(payload_bits(d, budget), budget), budget)
        mc, se = mc_detection_free(looks, budget, 10 ** 6,
                                   Stream.from_root(0, "accept", "mc",
                                                    f"{rho:g}"))
        ok = ok and abs(analytic - mc) <= 3.0 * se
        accs.append(_acc(c, label, SNR_EVAL))
    non_increasing = all(b <= a + 0.02 for a, b in zip(accs, accs[1:]))
    ok = ok and non_increasing
    _verdict(6, "warden detection model", ok,
             f"(dfp {sorted(dfp_rows.values())}, accuracy over rho {accs})")


# ---------------------------------------------------------- 7: private link


def test_criterion_07_private_link(cfg, ds, rows):
    d = rows["d"]
    moe = _moe_label(d)
    legit = _acc(d, moe, SNR_EVAL)
    eaves = _acc(d, moe, SNR_EVAL, metric="eavesdropper_accuracy")
    ctrl_legit = _acc(d, "normal", SNR_EVAL)
    ctrl_eaves = _acc(d, "normal", SNR_EVAL, metric="eavesdropper_accuracy")
    chance_cap = 1.0 / ds.k + 0.05
    ok = (legit >= 0.85 and eaves <= chance_cap
          and abs(ctrl_legit - ctrl_eaves) <= 0.05)
    _verdict(7, "private link", ok,
             f"(legit {legit:.3f}, eaves {eaves:.3f} vs cap {chance_cap:.3f},"
             f" control {ctrl_legit:.3f}/{ctrl_eaves:.3f})")


# ---------------------------------------------------- 8: combined scenarios


def test_criterion_08_combined_scenarios(rows):
    def acc(sid, label, metric="accuracy"):
        return _acc(rows[sid], label, SNR_EVAL, metric=metric)

    rho2 = "moe:rho=2"          # default compression in combined scenarios
    checks = [
        ("e accuracy vs a", acc("e", _moe_label(rows["e"])),
         acc("a", _moe_label(rows["a"])), 0.05),
        ("f accuracy vs b", acc("f", _moe_label(rows["f"])),
         acc("b", _moe_label(rows["b"])), 0.05),
        ("g accuracy vs c", acc("g", _moe_label(rows["g"])),
         acc("c", rho2), 0.05),
        ("h accuracy vs b", acc("h", _moe_label(rows["h"])),
         acc("b", _moe_label(rows["b"])), 0.05),
        ("g eaves vs d", acc("g", _moe_label(rows["g"]),
                             "eavesdropper_accuracy"),
         acc("d", _moe_label(rows["d"]), "eavesdropper_accuracy"), 0.05),
        ("h eaves vs d", acc("h", _moe_label(rows["h"]),
                             "eavesdropper_accuracy"),
         acc("d", _moe_label(rows["d"]), "eavesdropper_accuracy"), 0.05),
        ("e dfp vs c", acc("e", _moe_label(rows["e"]), "dfp"),
         acc("c", rho2, "dfp"), 0.01),
        ("f dfp vs c", acc("f", _moe_label(rows["f"]), "dfp"),
         acc("c", rho2, "dfp"), 0.01),
        ("g dfp vs c", acc("g", _moe_label(rows["g"]), "dfp"),
         acc("c", rho2, "dfp"), 0.01),
    ]
    ok = True
    worst = ("", 0.0)
    for name, combined, single, tol in checks:
        diff = abs(combined - single)
        if diff > worst[1]:
            worst = (name, diff)
        ok = ok and diff <= tol
    _verdict(8, "combined scenarios", ok,
             f"({len(checks)} comparisons, worst {worst[0]} "
             f"diff {worst[1]:.3f})")


# ------------------------------------------------------------- 9: gating


def test_criterion_09_gating(ds, stack):
    gate = stack["gate"]
    grid = enumerate_requirement_grid()
    images = ds.x_test[:len(grid)]
    rate = exact_match_rate(gate, grid, images)

    before, after = stack["hashes"]
    frozen = before == after

    wide = gate.extend("anonymizing")
    conservative = True
    for psr, img in zip(grid, images):
        old = gate.decide(psr, img)
        new = wide.decide(psr, img)
        conservative = conservative and new.kinds == old.kinds
        conservative = conservative and all(
            new.scores[k] == v for k, v in old.scores.items())
        conservative = conservative and new.scores["anonymizing"] < 0.5

    ok = rate >= 0.95 and frozen and conservative
    _verdict(9, "gating", ok,
             f"(exact match {rate:.3f}, experts frozen {frozen}, "
             f"extension conservative {conservative})")


# --------------------------------------------- 10: determinism and formats


def test_criterion_10_determinism_and_formats(tmp_path_factory, stack):
    root = tmp_path_factory.mktemp("accept-cli")
    work = root / "work"
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps({"paths": {"workdir": str(work)}}))
    flags = ["--config", str(cfg_path), "--seed", "42"]

    def cli(*args):
        proc = subprocess.run([sys.executable, "-m", "moesemcom",
                               *args, *flags],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        return proc

    cli("gen-data")
    cli("train", "--expert", "normal")
    cli("train", "--expert", "robust")
    cli("train-gate")
    cli("run-scenario", "--id", "a")
    first = (work / "scenario_a.csv").read_bytes()
    cli("run-scenario", "--id", "a")
    identical = (work / "scenario_a.csv").read_bytes() == first

    # checkpoint round trip at full scale: the file re-serializes to the
    # same bytes and two loads agree on every parameter digest
    p1, p2 = root / "rt1.smck", root / "rt2.smck"
    save_checkpoint(stack["reg"], stack["gate"], p1)
    reg2, gate2 = restore(load_checkpoint(p1))
    save_checkpoint(reg2, gate2, p2)
    reg3, _ = restore(load_checkpoint(p2))
    round_trip = (p1.read_bytes() == p2.read_bytes()
                  and reg2.hashes() == reg3.hashes())

    raw = p1.read_bytes()
    bad = root / "cut.smck"
    bad.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(CheckpointError) as err:
        load_checkpoint(bad)
    rejected = err.value.code == "truncated"

    ok = identical and round_trip and rejected
    _verdict(10, "determinism and formats", ok,
             f"(csv identical {identical}, round trip {round_trip}, "
             f"truncation code ok {rejected})")
