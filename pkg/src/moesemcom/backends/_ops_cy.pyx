# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels.

Mirrors _ops_py semantics: float64 C-contiguous arrays, int64 labels, same
update order in adam_step, same zero-row error in power_norm_fwd. Matrix
products go through BLAS dgemm; everything else is a typed loop.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, log1p, sqrt
from scipy.linalg.cython_blas cimport dgemm

NAME = "cython"


cdef void _gemm_rowmajor(bint ta, bint tb,
                         double[:, ::1] a, double[:, ::1] b,
                         double[:, ::1] c) except *:
    # row-major op(a) @ op(b) via column-major dgemm on the swapped operands
    cdef int M = c.shape[0], N = c.shape[1]
    cdef int K = a.shape[0] if ta else a.shape[1]
    cdef int Kb = b.shape[1] if tb else b.shape[0]
    if K != Kb:
        raise ValueError("gemm inner dimensions differ")
    cdef char fa = c'T' if tb else c'N'
    cdef char fb = c'T' if ta else c'N'
    cdef int lda = <int>b.shape[1], ldb = <int>a.shape[1], ldc = N
    cdef double one = 1.0, zero = 0.0
    if M == 0 or N == 0:
        return
    dgemm(&fa, &fb, &N, &M, &K, &one,
          &b[0, 0], &lda, &a[0, 0], &ldb, &zero, &c[0, 0], &ldc)


def matmul(double[:, ::1] a, double[:, ::1] b):
    out = np.empty((a.shape[0], b.shape[1]))
    _gemm_rowmajor(False, False, a, b, out)
    return out


def matmul_tn(double[:, ::1] a, double[:, ::1] b):
    out = np.empty((a.shape[1], b.shape[1]))
    _gemm_rowmajor(True, False, a, b, out)
    return out


def matmul_nt(double[:, ::1] a, double[:, ::1] b):
    out = np.empty((a.shape[0], b.shape[0]))
    _gemm_rowmajor(False, True, a, b, out)
    return out


def relu_fwd(double[:, ::1] x):
    cdef Py_ssize_t i, j, n = x.shape[0], m = x.shape[1]
    out_arr = np.empty((n, m))
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        for j in range(m):
            out[i, j] = x[i, j] if x[i, j] > 0.0 else 0.0
    return out_arr


def relu_bwd(double[:, ::1] x, double[:, ::1] gy):
    cdef Py_ssize_t i, j, n = x.shape[0], m = x.shape[1]
    out_arr = np.empty((n, m))
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        for j in range(m):
            out[i, j] = gy[i, j] if x[i, j] > 0.0 else 0.0
    return out_arr


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def logistic(double[:, ::1] z):
    cdef Py_ssize_t i, j, n = z.shape[0], m = z.shape[1]
    out_arr = np.empty((n, m))
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        for j in range(m):
            out[i, j] = _sigmoid(z[i, j])
    return out_arr


def softmax_xent_fwd(double[:, ::1] logits, const cnp.int64_t[::1] labels):
    cdef Py_ssize_t i, j, n = logits.shape[0], k = logits.shape[1]
    probs_arr = np.empty((n, k))
    cdef double[:, ::1] probs = probs_arr
    cdef double mx, z, loss = 0.0
    for i in range(n):
        mx = logits[i, 0]
        for j in range(1, k):
            if logits[i, j] > mx:
                mx = logits[i, j]
        z = 0.0
        for j in range(k):
            probs[i, j] = exp(logits[i, j] - mx)
            z += probs[i, j]
        for j in range(k):
            probs[i, j] /= z
        loss += mx + log(z) - logits[i, labels[i]]
    return loss / n, probs_arr


def softmax_xent_bwd(double[:, ::1] probs, const cnp.int64_t[::1] labels,
                     double gscale):
    cdef Py_ssize_t i, j, n = probs.shape[0], k = probs.shape[1]
    out_arr = np.empty((n, k))
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        for j in range(k):
            out[i, j] = probs[i, j] * gscale
        out[i, labels[i]] -= gscale
    return out_arr


def bce_logits_fwd(double[:, ::1] z, double[:, ::1] t):
    cdef Py_ssize_t i, j, n = z.shape[0], m = z.shape[1]
    sig_arr = np.empty((n, m))
    cdef double[:, ::1] sig = sig_arr
    cdef double loss = 0.0, zi
    for i in range(n):
        for j in range(m):
            zi = z[i, j]
            loss += (zi if zi > 0.0 else 0.0) - zi * t[i, j] + log1p(exp(-fabs(zi)))
            sig[i, j] = _sigmoid(zi)
    return loss / (n * m), sig_arr


def bce_logits_bwd(double[:, ::1] sig, double[:, ::1] t, double gscale):
    cdef Py_ssize_t i, j, n = sig.shape[0], m = sig.shape[1]
    out_arr = np.empty((n, m))
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        for j in range(m):
            out[i, j] = (sig[i, j] - t[i, j]) * gscale
    return out_arr


def power_norm_fwd(double[:, ::1] x):
    cdef Py_ssize_t i, j, n = x.shape[0], m = x.shape[1]
    y_arr = np.empty((n, m))
    s_arr = np.empty(n)
    cdef double[:, ::1] y = y_arr
    cdef double[::1] s = s_arr
    cdef double ss
    for i in range(n):
        ss = 0.0
        for j in range(m):
            ss += x[i, j] * x[i, j]
        if ss == 0.0:
            raise ValueError("cannot power-normalize a zero row")
        s[i] = sqrt(m / ss)
        for j in range(m):
            y[i, j] = x[i, j] * s[i]
    return y_arr, s_arr


def power_norm_bwd(double[:, ::1] x, double[::1] s, double[:, ::1] gy):
    cdef Py_ssize_t i, j, n = x.shape[0], m = x.shape[1]
    out_arr = np.empty((n, m))
    cdef double[:, ::1] out = out_arr
    cdef double dot, c
    for i in range(n):
        dot = 0.0
        for j in range(m):
            dot += gy[i, j] * x[i, j]
        c = (s[i] * s[i] * s[i] / m) * dot
        for j in range(m):
            out[i, j] = s[i] * gy[i, j] - c * x[i, j]
    return out_arr


def sumsq_diff(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    diff_arr = np.empty((n, m))
    cdef double[:, ::1] diff = diff_arr
    cdef double total = 0.0, d
    for i in range(n):
        for j in range(m):
            d = a[i, j] - b[i, j]
            diff[i, j] = d
            total += d * d
    return total, diff_arr


def adam_step(double[:, ::1] p, double[:, ::1] g,
              double[:, ::1] m, double[:, ::1] v,
              long long t, double lr, double b1, double b2, double eps):
    cdef Py_ssize_t i, j, n = p.shape[0], k = p.shape[1]
    cdef double c1 = 1.0 - b1 ** t, c2 = 1.0 - b2 ** t
    cdef double mhat, vhat
    for i in range(n):
        for j in range(k):
            m[i, j] = b1 * m[i, j] + (1.0 - b1) * g[i, j]
            v[i, j] = b2 * v[i, j] + (1.0 - b2) * g[i, j] * g[i, j]
            mhat = m[i, j] / c1
            vhat = v[i, j] / c2
            p[i, j] -= lr * mhat / (sqrt(vhat) + eps)
