"""Numpy implementations of the hot kernels.

This is the fallback backend and the reference the compiled backend is
checked against. All arrays are float64 and C-contiguous; labels are int64.
Scalar reductions may differ from the compiled backend in the last few ulps
(numpy uses pairwise summation), which is why cross-backend tests compare
at tolerance while same-backend runs are bitwise reproducible.
"""

import numpy as np

NAME = "python"


def matmul(a, b):
    return a @ b


def matmul_tn(a, b):
    """a.T @ b without materializing the transpose."""
    return a.T @ b


def matmul_nt(a, b):
    return a @ b.T


def relu_fwd(x):
    return np.maximum(x, 0.0)


def relu_bwd(x, gy):
    return gy * (x > 0.0)


def logistic(z):
    # split by sign so neither exp overflows
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax_xent_fwd(logits, labels):
    """Mean cross entropy over rows; returns (loss, row softmax)."""
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    z = e.sum(axis=1, keepdims=True)
    probs = e / z
    n = logits.shape[0]
    lse = m[:, 0] + np.log(z[:, 0])
    loss = float(np.mean(lse - logits[np.arange(n), labels]))
    return loss, probs


def softmax_xent_bwd(probs, labels, gscale):
    """d loss / d logits, with gscale = upstream_grad / n_rows."""
    d = probs.copy()
    d[np.arange(probs.shape[0]), labels] -= 1.0
    d *= gscale
    return d


def bce_logits_fwd(z, t):
    """Mean binary cross entropy from logits; returns (loss, sigmoid(z))."""
    per = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    return float(per.mean()), logistic(z)


def bce_logits_bwd(sig, t, gscale):
    return (sig - t) * gscale


def power_norm_fwd(x):
    """Scale each row to squared norm == row length; returns (y, scales)."""
    ss = np.einsum("ij,ij->i", x, x)
    if np.any(ss == 0.0):
        raise ValueError("cannot power-normalize a zero row")
    s = np.sqrt(x.shape[1] / ss)
    return x * s[:, None], s


def power_norm_bwd(x, s, gy):
    m = x.shape[1]
    dot = np.einsum("ij,ij->i", gy, x)
    return s[:, None] * gy - ((s**3 / m) * dot)[:, None] * x


def sumsq_diff(a, b):
    """Total squared difference; returns (sum, a - b) for the backward pass."""
    diff = a - b
    return float(np.einsum("ij,ij->", diff, diff)), diff


def adam_step(p, g, m, v, t, lr, b1, b2, eps):
    """One Adam update, in place on p, m, v. t is the 1-based step count."""
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    mhat = m / (1.0 - b1**t)
    vhat = v / (1.0 - b2**t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)
