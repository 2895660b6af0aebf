"""Expert selection: requirement encoding, the gate MLP, and its training.

The gate maps a user's declared security needs plus a coarse view of the
message to independent per-expert scores. Selection is multi-label (a user
can want several properties at once), so the head is sigmoid-per-kind with
an inclusive 0.5 threshold, and training adds a small L1 pressure on the
scores so experts nobody asked for stay off.

Labels depend only on the declared needs. The message features ride along
as gate input so a future content-aware policy has somewhere to live, but
the ground-truth rule here never reads them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import batches
from .errors import ConfigError, FrozenParameterError
from .experts.registry import (
    BASE_KINDS,
    COVERT,
    NORMAL,
    PRIVATE,
    ROBUST,
    ExpertRegistry,
    TrainedExpert,
)
from .nn import (
    Adam,
    ParameterSet,
    Tape,
    Tensor,
    add,
    affine,
    bce_with_logits,
    relu,
    scale,
    sigmoid,
    sum_all,
)
from .prng import Stream

log = logging.getLogger(__name__)

RHO_GRID = (1.33, 2.0, 4.0)
GATE_HIDDEN = 32
N_POOLED = 16
_IMG_SIDE = 16


@dataclass(frozen=True)
class SecurityRequirement:
    """User-declared needs for one transmission.

    covert_level indexes RHO_GRID (1-based) and must be set exactly when
    covertness is. extras names extension expert kinds beyond the base
    four.
    """

    robustness: bool = False
    covertness: bool = False
    covert_level: int = 0
    confidentiality: bool = False
    extras: tuple = ()

    def __post_init__(self):
        if self.covertness:
            if self.covert_level not in (1, 2, 3):
                raise ConfigError("covertness needs covert_level in {1, 2, 3}")
        elif self.covert_level != 0:
            raise ConfigError("covert_level is only meaningful with covertness")
        for kind in self.extras:
            if kind in BASE_KINDS:
                raise ConfigError(f"{kind} is a base kind, not an extra")

    @property
    def rho(self) -> Optional[float]:
        return RHO_GRID[self.covert_level - 1] if self.covertness else None


@dataclass(frozen=True)
class GatingDecision:
    """Scores per kind, the thresholded selection in fixed execution order,
    and the compression ratio the covert stage should run at."""

    scores: dict
    kinds: tuple
    rho: Optional[float]


def requirement_label(psr: SecurityRequirement, kinds: Sequence[str]) -> np.ndarray:
    """Ground-truth selection vector over `kinds` for one requirement.

    Each declared need maps to its expert; declaring nothing maps to the
    normal codec alone.
    """
    demanded = set(psr.extras)
    if psr.robustness:
        demanded.add(ROBUST)
    if psr.covertness:
        demanded.add(COVERT)
    if psr.confidentiality:
        demanded.add(PRIVATE)
    if not demanded:
        demanded.add(NORMAL)
    return np.array([1.0 if k in demanded else 0.0 for k in kinds])


def pooled_features(images: np.ndarray) -> np.ndarray:
    """(n, 256) pixel blocks to (n, 16) via 4x4 mean pooling."""
    n = images.shape[0]
    if images.shape[1] != _IMG_SIDE * _IMG_SIDE:
        raise ConfigError("gate input images must be 16x16 blocks")
    return images.reshape(n, 4, 4, 4, 4).mean(axis=(2, 4)).reshape(n, N_POOLED)


def encode_requirements(psr: SecurityRequirement, image: np.ndarray,
                        extension_kinds: Sequence[str] = ()) -> np.ndarray:
    """One gate input row: [robustness, covertness, covert_level/3,
    confidentiality, 16 pooled features, extension flags...].

    Extension flags sit at the end so the 20-entry core keeps its layout
    forever; that is what lets an extended gate replay old decisions
    bit-for-bit (see GateModel.scores).
    """
    return encode_requirement_batch([psr], np.asarray(image).reshape(1, -1),
                                    extension_kinds)[0]


def encode_requirement_batch(psrs: Sequence[SecurityRequirement],
                             images: np.ndarray,
                             extension_kinds: Sequence[str] = ()) -> np.ndarray:
    n = len(psrs)
    if images.shape[0] != n:
        raise ConfigError("one image per requirement")
    flags = np.zeros((n, 4))
    ext = np.zeros((n, len(extension_kinds)))
    for i, p in enumerate(psrs):
        flags[i, 0] = 1.0 if p.robustness else 0.0
        flags[i, 1] = 1.0 if p.covertness else 0.0
        flags[i, 2] = p.covert_level / 3.0
        flags[i, 3] = 1.0 if p.confidentiality else 0.0
        for j, kind in enumerate(extension_kinds):
            ext[i, j] = 1.0 if kind in p.extras else 0.0
    return np.hstack([flags, pooled_features(images), ext])


class GateModel:
    """Two-layer selector over expert kinds.

    The input is the requirement encoding; the output is one logit per
    kind in `kinds` order (base kinds first, extensions in registration
    order). Extension appends a zero input row and a zero output column
    with bias -2, which leaves every pre-extension decision bit-identical
    until fine-tuning moves the new weights.
    """

    N_CORE = 4 + N_POOLED  # requirement flags + pooled features

    def __init__(self, kinds: tuple, params: ParameterSet):
        self.kinds = kinds
        self.params = params
        self.manifest: dict = {}

    @classmethod
    def build(cls, seed: int) -> "GateModel":
        stream = Stream.from_root(seed, "gate-init")
        d_in = 4 + N_POOLED
        n_out = len(BASE_KINDS)
        ps = ParameterSet()
        w1 = stream.normal(d_in * GATE_HIDDEN, sigma=np.sqrt(2.0 / d_in)) \
            .reshape(d_in, GATE_HIDDEN)
        w2 = stream.normal(GATE_HIDDEN * n_out, sigma=np.sqrt(1.0 / GATE_HIDDEN)) \
            .reshape(GATE_HIDDEN, n_out)
        ps.add("gate.w1", w1)
        ps.add("gate.b1", np.zeros(GATE_HIDDEN))
        ps.add("gate.w2", w2)
        ps.add("gate.b2", np.zeros(n_out))
        return cls(BASE_KINDS, ps)

    @property
    def extension_kinds(self) -> tuple:
        return self.kinds[len(BASE_KINDS):]

    def forward(self, feats: Tensor) -> Tensor:
        h = relu(affine(feats, self.params["gate.w1"], self.params["gate.b1"]))
        return affine(h, self.params["gate.w2"], self.params["gate.b2"])

    def scores(self, feats: np.ndarray) -> np.ndarray:
        # Fixed-shape blocks, not one fused product: the core matmul and
        # the per-column output products are the same calls a narrower
        # gate makes, and a zero extension flag adds an exact zero, so an
        # extended gate reproduces old scores bit-for-bit.
        p = self.params
        w1, w2 = p["gate.w1"].data, p["gate.w2"].data
        z1 = feats[:, :self.N_CORE] @ w1[:self.N_CORE] + p["gate.b1"].data
        for j in range(feats.shape[1] - self.N_CORE):
            z1 = z1 + feats[:, self.N_CORE + j, None] * w1[self.N_CORE + j]
        h = np.maximum(z1, 0.0)
        z2 = np.stack([h @ w2[:, j] for j in range(w2.shape[1])], axis=1)
        return 1.0 / (1.0 + np.exp(-(z2 + p["gate.b2"].data)))

    def decide(self, psr: SecurityRequirement, image: np.ndarray) -> GatingDecision:
        feats = encode_requirements(psr, image, self.extension_kinds)
        s = self.scores(feats[None, :])[0]
        selected = [k for k, v in zip(self.kinds, s) if v >= 0.5]
        if ROBUST in selected and NORMAL in selected:
            selected.remove(NORMAL)  # the robust codec replaces, not augments
        return GatingDecision(scores=dict(zip(self.kinds, s.tolist())),
                              kinds=tuple(selected), rho=psr.rho)

    def extend(self, new_kind: str) -> "GateModel":
        """Widened copy covering one more kind; see class docstring."""
        if new_kind in self.kinds:
            raise ConfigError(f"gate already scores kind: {new_kind}")
        p = self.params
        w1 = np.vstack([p["gate.w1"].data, np.zeros((1, GATE_HIDDEN))])
        w2 = np.hstack([p["gate.w2"].data, np.zeros((GATE_HIDDEN, 1))])
        b2 = np.append(p["gate.b2"].data, -2.0)
        ps = ParameterSet()
        ps.add("gate.w1", w1)
        ps.add("gate.b1", p["gate.b1"].data.copy())
        ps.add("gate.w2", w2)
        ps.add("gate.b2", b2)
        out = GateModel(self.kinds + (new_kind,), ps)
        out.manifest = dict(self.manifest)
        return out


def synthesize_requirements(n: int, stream: Stream,
                            extension_kinds: Sequence[str] = ()) -> list:
    """Uniform draw over the flag space, with a uniform grid level whenever
    covertness comes up."""
    ext = tuple(extension_kinds)
    coins = stream.uniform(n * (3 + len(ext))).reshape(n, 3 + len(ext)) < 0.5
    levels = 1 + stream.integers(n, 3)
    out = []
    for i in range(n):
        cov = bool(coins[i, 1])
        out.append(SecurityRequirement(
            robustness=bool(coins[i, 0]),
            covertness=cov,
            covert_level=int(levels[i]) if cov else 0,
            confidentiality=bool(coins[i, 2]),
            extras=tuple(k for j, k in enumerate(ext) if coins[i, 3 + j]),
        ))
    return out


def enumerate_requirement_grid(extension_kinds: Sequence[str] = ()) -> list:
    """Every flag combination, expanded over all three covert levels."""
    ext = tuple(extension_kinds)
    out = []
    for bits in range(2 ** (3 + len(ext))):
        rob = bool(bits & 1)
        cov = bool(bits & 2)
        conf = bool(bits & 4)
        extras = tuple(k for j, k in enumerate(ext) if bits & (8 << j))
        for level in (1, 2, 3) if cov else (0,):
            out.append(SecurityRequirement(rob, cov, level, conf, extras))
    return out


def exact_match_rate(gate: GateModel, psrs: Sequence[SecurityRequirement],
                     images: np.ndarray) -> float:
    """Fraction of decisions whose selected set equals the label rule's
    set. Mismatches go to the module logger with their requirement."""
    hits = 0
    for psr, img in zip(psrs, images):
        want = {k for k, v in zip(gate.kinds, requirement_label(psr, gate.kinds))
                if v > 0.0}
        got = set(gate.decide(psr, img).kinds)
        if got == want:
            hits += 1
        else:
            log.warning("gate mismatch: %s -> %s (wanted %s)", psr,
                        sorted(got), sorted(want))
    return hits / len(psrs)


def _fit(gate: GateModel, psrs: list, images: np.ndarray, lam: float,
         seed: int, epochs: int, batch_size: int, lr: float) -> list:
    feats = encode_requirement_batch(psrs, images, gate.extension_kinds)
    targets = np.stack([requirement_label(p, gate.kinds) for p in psrs])
    opt = Adam(gate.params, lr=lr)
    shuffle = Stream.from_root(seed, "gate", "shuffle")
    curve = []
    for _ in range(epochs):
        tot, nb = 0.0, 0
        for idx in batches(len(psrs), batch_size, shuffle):
            with Tape() as tape:
                logits = gate.forward(Tensor(feats[idx]))
                loss = bce_with_logits(logits, targets[idx])
                if lam > 0.0:
                    penalty = scale(sum_all(sigmoid(logits)), lam / len(idx))
                    loss = add(loss, penalty)
            gate.params.zero_grad()
            tape.backward(loss)
            opt.step()
            tot += float(loss.data)
            nb += 1
        curve.append(tot / nb)
    return curve


def train_gate(gate: GateModel, registry: ExpertRegistry, images: np.ndarray,
               *, n_samples: int = 4096, lam: float = 0.01, seed: int = 0,
               epochs: int = 30, batch_size: int = 64,
               lr: float = 1e-2) -> GateModel:
    """Fit the gate on synthetic requirements paired with training images.

    Every expert stays frozen: the digest of each registered parameter set
    is checked before and after, and a change is a hard error.
    """
    before = registry.hashes()
    draw = Stream.from_root(seed, "gate", "requirements")
    psrs = synthesize_requirements(n_samples, draw, gate.extension_kinds)
    pick = Stream.from_root(seed, "gate", "images")
    img = images[pick.integers(n_samples, len(images))]
    curve = _fit(gate, psrs, img, lam, seed, epochs, batch_size, lr)
    if registry.hashes() != before:
        raise FrozenParameterError("expert parameters changed during gate training")
    gate.params.freeze()
    gate.manifest = {
        "kinds": list(gate.kinds), "n_samples": n_samples, "lam": lam,
        "seed": seed, "epochs": epochs, "batch_size": batch_size, "lr": lr,
        "loss_per_epoch": curve,
    }
    return gate


def register_expert_and_finetune(gate: GateModel, registry: ExpertRegistry,
                                 new_expert: TrainedExpert,
                                 images: np.ndarray, *, n_samples: int = 4096,
                                 lam: float = 0.01, seed: int = 1,
                                 epochs: int = 30, batch_size: int = 64,
                                 lr: float = 1e-2) -> GateModel:
    """Add a trained extension expert and fine-tune a widened gate.

    Only the widened copy trains; the original gate and every previously
    registered expert stay untouched.
    """
    if new_expert.kind in gate.kinds or registry.has(new_expert.kind):
        raise ConfigError(f"expert kind already registered: {new_expert.kind}")
    before = registry.hashes()
    registry.register(new_expert)
    wide = gate.extend(new_expert.kind)
    draw = Stream.from_root(seed, "gate-ext", "requirements")
    psrs = synthesize_requirements(n_samples, draw, wide.extension_kinds)
    pick = Stream.from_root(seed, "gate-ext", "images")
    img = images[pick.integers(n_samples, len(images))]
    curve = _fit(wide, psrs, img, lam, seed, epochs, batch_size, lr)
    after = registry.hashes()
    if any(after[k] != v for k, v in before.items()):
        raise FrozenParameterError("expert parameters changed during gate fine-tune")
    wide.params.freeze()
    wide.manifest = dict(gate.manifest)
    wide.manifest.update({
        "kinds": list(wide.kinds), "finetune_seed": seed,
        "finetune_loss_per_epoch": curve,
    })
    return wide
