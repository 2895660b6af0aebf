"""Named parameter collections and the Adam optimizer."""

from __future__ import annotations

import hashlib

import numpy as np

from ..backends import ops as K
from ..errors import FrozenParameterError
from .autograd import Tensor


class ParameterSet:
    """Insertion-ordered mapping of name -> trainable Tensor.

    Freezing is one-way and makes any later optimizer step raise, which is
    how downstream training stages guarantee they never touch an already
    trained expert. state_hash covers parameter values only.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self.frozen = False

    def add(self, name: str, data) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        if self.frozen:
            raise FrozenParameterError("cannot add to a frozen parameter set")
        t = Tensor(data, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self):
        return list(self._params.values())

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def freeze(self):
        self.frozen = True

    def n_values(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def state_hash(self) -> str:
        """sha256 over (name, shape, float64 bytes) in insertion order."""
        h = hashlib.sha256()
        for name, t in self._params.items():
            h.update(name.encode("utf-8"))
            h.update(b"\x00")
            h.update(str(t.data.shape).encode("ascii"))
            h.update(b"\x00")
            h.update(t.data.tobytes())
        return h.hexdigest()


def _as2d(a: np.ndarray) -> np.ndarray:
    return a if a.ndim == 2 else a.reshape(1, -1)


class Adam:
    """Adam with bias correction. Moments live here, keyed by parameter
    name, so checkpoints carry only parameter values."""

    def __init__(self, params: ParameterSet, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0.0:
            raise ValueError("learning rate must be positive")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self):
        if self.params.frozen:
            raise FrozenParameterError("optimizer step on a frozen parameter set")
        self.step_count += 1
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if name not in self._m:
                self._m[name] = np.zeros_like(p.data)
                self._v[name] = np.zeros_like(p.data)
            K.adam_step(_as2d(p.data), _as2d(np.ascontiguousarray(g)),
                        _as2d(self._m[name]), _as2d(self._v[name]),
                        self.step_count, self.lr, self.beta1, self.beta2,
                        self.eps)
