"""Central-difference gradient verification."""

from __future__ import annotations

import numpy as np

from ..prng import Stream
from .autograd import Tape, Tensor


def grad_check(loss_fn, tensors: list[Tensor], stream: Stream,
               coords_per_tensor: int = 5, h: float = 1e-5) -> float:
    """Compare tape gradients of loss_fn against central differences.

    loss_fn must run a fresh forward pass on each call (it is invoked once
    under a tape and twice per probed coordinate without one). Coordinates
    are sampled from `stream`. Returns the worst relative error, guarded as
    |a - n| / max(1, |a|, |n|).
    """
    for t in tensors:
        t.grad = None
    with Tape() as tape:
        tape.backward(loss_fn())
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy()
                for t in tensors]

    worst = 0.0
    for t, ana in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        k = min(coords_per_tensor, flat.size)
        for i in stream.integers(k, flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = float(loss_fn().data)
            flat[i] = orig - h
            lm = float(loss_fn().data)
            flat[i] = orig
            num = (lp - lm) / (2.0 * h)
            a = float(ana.reshape(-1)[i])
            err = abs(a - num) / max(1.0, abs(a), abs(num))
            worst = max(worst, err)
    return worst
