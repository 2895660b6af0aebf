"""Tape-based reverse-mode autodiff over float64 numpy arrays.

A Tensor is a dense array plus an optional gradient. Ops run eagerly through
the selected kernel backend; when a Tape is active and an input requires
grad, the op pushes a backward closure onto the tape. Tape.backward replays
the closures in reverse. No graph object, no broadcasting cleverness: every
op states its exact shapes.

Constants that never need gradients (channel noise, keys, fixed mixing
matrices) are passed as plain ndarrays, not Tensors.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..backends import ops as K

_ACTIVE: Optional["Tape"] = None


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "tape")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        # ascontiguousarray would promote scalars to shape (1,); losses
        # must stay 0-d
        d = np.asarray(data, dtype=np.float64)
        if d.ndim > 0 and not d.flags["C_CONTIGUOUS"]:
            d = np.ascontiguousarray(d)
        self.data = d
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self.tape: Optional[Tape] = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape}, grad={self.requires_grad})"


class Tape:
    """Ordered record of backward closures for one forward pass."""

    def __init__(self):
        self._records = []

    def __enter__(self):
        global _ACTIVE
        if _ACTIVE is not None:
            raise RuntimeError("tapes do not nest")
        _ACTIVE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE
        _ACTIVE = None
        return False

    def backward(self, loss: Tensor):
        if loss.data.shape != ():
            raise ValueError("backward needs a scalar loss")
        if loss.tape is not self:
            raise ValueError("loss was not produced under this tape")
        loss.grad = np.ones(())
        for fn in reversed(self._records):
            fn()


def _record(out: Tensor, fn) -> None:
    if _ACTIVE is not None and out.requires_grad:
        out.tape = _ACTIVE
        _ACTIVE._records.append(fn)


def _accum(t: Tensor, g: np.ndarray) -> None:
    t.grad = g if t.grad is None else t.grad + g


# ---------------------------------------------------------------- layers


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with x (n, din), w (din, dout), b (dout,)."""
    out = Tensor(K.matmul(x.data, w.data) + b.data,
                 x.requires_grad or w.requires_grad or b.requires_grad)

    def bwd():
        g = out.grad
        if g is None:
            return
        if x.requires_grad:
            _accum(x, K.matmul_nt(g, w.data))
        if w.requires_grad:
            _accum(w, K.matmul_tn(x.data, g))
        if b.requires_grad:
            _accum(b, g.sum(axis=0))

    _record(out, bwd)
    return out


def relu(x: Tensor) -> Tensor:
    out = Tensor(K.relu_fwd(x.data), x.requires_grad)

    def bwd():
        if out.grad is not None and x.requires_grad:
            _accum(x, K.relu_bwd(x.data, out.grad))

    _record(out, bwd)
    return out


def matmul_const(x: Tensor, m: np.ndarray) -> Tensor:
    """x @ m for a fixed matrix m."""
    out = Tensor(K.matmul(x.data, m), x.requires_grad)

    def bwd():
        if out.grad is not None and x.requires_grad:
            _accum(x, K.matmul_nt(out.grad, m))

    _record(out, bwd)
    return out


# ---------------------------------------------------------------- losses


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross entropy against int64 class labels."""
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    loss, probs = K.softmax_xent_fwd(logits.data, labels)
    out = Tensor(loss, logits.requires_grad)

    def bwd():
        if out.grad is not None and logits.requires_grad:
            gscale = float(out.grad) / logits.data.shape[0]
            _accum(logits, K.softmax_xent_bwd(probs, labels, gscale))

    _record(out, bwd)
    return out


def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean element-wise binary cross entropy from logits."""
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    loss, sig = K.bce_logits_fwd(logits.data, targets)
    out = Tensor(loss, logits.requires_grad)

    def bwd():
        if out.grad is not None and logits.requires_grad:
            gscale = float(out.grad) / logits.data.size
            _accum(logits, K.bce_logits_bwd(sig, targets, gscale))

    _record(out, bwd)
    return out


def sq_dist(a: Tensor, b: Tensor) -> Tensor:
    """Batch mean of per-row squared L2 distance."""
    total, diff = K.sumsq_diff(a.data, b.data)
    n = a.data.shape[0]
    out = Tensor(total / n, a.requires_grad or b.requires_grad)

    def bwd():
        g = out.grad
        if g is None:
            return
        d = (2.0 * float(g) / n) * diff
        if a.requires_grad:
            _accum(a, d)
        if b.requires_grad:
            _accum(b, -d)

    _record(out, bwd)
    return out


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean over all elements of the squared difference."""
    total, diff = K.sumsq_diff(a.data, b.data)
    out = Tensor(total / a.data.size, a.requires_grad or b.requires_grad)

    def bwd():
        g = out.grad
        if g is None:
            return
        d = (2.0 * float(g) / a.data.size) * diff
        if a.requires_grad:
            _accum(a, d)
        if b.requires_grad:
            _accum(b, -d)

    _record(out, bwd)
    return out


# ---------------------------------------------------------------- pointwise


def sigmoid(x: Tensor) -> Tensor:
    sig = K.logistic(x.data)
    out = Tensor(sig, x.requires_grad)

    def bwd():
        if out.grad is not None and x.requires_grad:
            _accum(x, out.grad * sig * (1.0 - sig))

    _record(out, bwd)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, a.requires_grad or b.requires_grad)

    def bwd():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accum(a, g)
        if b.requires_grad:
            _accum(b, g)

    _record(out, bwd)
    return out


def scale(x: Tensor, c: float) -> Tensor:
    out = Tensor(x.data * c, x.requires_grad)

    def bwd():
        if out.grad is not None and x.requires_grad:
            _accum(x, out.grad * c)

    _record(out, bwd)
    return out


def add_const(x: Tensor, arr: np.ndarray) -> Tensor:
    """x + fixed array (noise injection); gradient passes through."""
    out = Tensor(x.data + arr, x.requires_grad)

    def bwd():
        if out.grad is not None and x.requires_grad:
            _accum(x, out.grad)

    _record(out, bwd)
    return out


def mul_const(x: Tensor, arr: np.ndarray) -> Tensor:
    """x * fixed array (sign masks)."""
    out = Tensor(x.data * arr, x.requires_grad)

    def bwd():
        if out.grad is not None and x.requires_grad:
            _accum(x, out.grad * arr)

    _record(out, bwd)
    return out


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(x.data.sum(), x.requires_grad)

    def bwd():
        if out.grad is not None and x.requires_grad:
            _accum(x, np.full_like(x.data, float(out.grad)))

    _record(out, bwd)
    return out


# ---------------------------------------------------------------- structure


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    na = a.data.shape[1]
    out = Tensor(np.concatenate([a.data, b.data], axis=1),
                 a.requires_grad or b.requires_grad)

    def bwd():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accum(a, np.ascontiguousarray(g[:, :na]))
        if b.requires_grad:
            _accum(b, np.ascontiguousarray(g[:, na:]))

    _record(out, bwd)
    return out


def slice_cols(x: Tensor, lo: int, hi: int) -> Tensor:
    out = Tensor(x.data[:, lo:hi], x.requires_grad)

    def bwd():
        if out.grad is not None and x.requires_grad:
            g = np.zeros_like(x.data)
            g[:, lo:hi] = out.grad
            _accum(x, g)

    _record(out, bwd)
    return out


def permute_cols(x: Tensor, perm: np.ndarray) -> Tensor:
    """Row-wise gather: out[i, j] = x[i, perm[i, j]]; perm rows are
    permutations of range(m)."""
    out = Tensor(np.take_along_axis(x.data, perm, axis=1), x.requires_grad)

    def bwd():
        if out.grad is not None and x.requires_grad:
            inv = np.argsort(perm, axis=1)
            _accum(x, np.take_along_axis(out.grad, inv, axis=1))

    _record(out, bwd)
    return out


def power_normalize(x: Tensor) -> Tensor:
    """Scale each row so its mean squared entry is 1."""
    y, s = K.power_norm_fwd(x.data)
    out = Tensor(y, x.requires_grad)

    def bwd():
        if out.grad is not None and x.requires_grad:
            _accum(x, K.power_norm_bwd(x.data, s, np.ascontiguousarray(out.grad)))

    _record(out, bwd)
    return out
