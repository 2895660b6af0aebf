"""Cross-backend agreement checks.

The numpy module is the reference; the compiled module must agree to float64
rounding on every kernel. Loss reductions are compared at 1e-12 relative
tolerance because summation order differs; elementwise kernels must match
bit for bit.
"""

import numpy as np
import pytest

from moesemcom.backends import _ops_py, available_backends
from moesemcom.prng import Stream

cy = pytest.importorskip("moesemcom.backends._ops_cy")


def _rand(stream, *shape):
    return stream.normal(int(np.prod(shape))).reshape(shape)


def test_backend_listing_includes_both():
    names = available_backends()
    assert "python" in names and "cython" in names


def test_matmul_variants_agree():
    s = Stream.from_root(0, "mm")
    a = _rand(s, 17, 9)
    b = _rand(s, 9, 13)
    c = _rand(s, 17, 13)
    d = _rand(s, 13, 9)
    assert np.allclose(cy.matmul(a, b), _ops_py.matmul(a, b), rtol=1e-12, atol=1e-14)
    assert np.allclose(cy.matmul_tn(a, c), _ops_py.matmul_tn(a, c), rtol=1e-12, atol=1e-14)
    assert np.allclose(cy.matmul_nt(a, d), _ops_py.matmul_nt(a, d), rtol=1e-12, atol=1e-14)


def test_relu_bitwise_and_logistic_to_ulps():
    # relu moves values untouched, so it must match exactly; logistic goes
    # through exp, where libm and numpy's vector math differ in the last ulp
    s = Stream.from_root(1, "rl")
    x = _rand(s, 11, 7)
    gy = _rand(s, 11, 7)
    assert np.array_equal(cy.relu_fwd(x), _ops_py.relu_fwd(x))
    assert np.array_equal(cy.relu_bwd(x, gy), _ops_py.relu_bwd(x, gy))
    assert np.allclose(cy.logistic(x), _ops_py.logistic(x), rtol=1e-14, atol=0)


def test_softmax_xent_agrees():
    s = Stream.from_root(2, "sm")
    logits = _rand(s, 33, 8) * 3.0
    labels = s.integers(33, 8)
    l1, p1 = cy.softmax_xent_fwd(logits, labels)
    l2, p2 = _ops_py.softmax_xent_fwd(logits, labels)
    assert abs(l1 - l2) < 1e-12
    assert np.allclose(p1, p2, rtol=1e-13, atol=1e-15)
    g1 = cy.softmax_xent_bwd(p1, labels, 1.0 / 33)
    g2 = _ops_py.softmax_xent_bwd(p2, labels, 1.0 / 33)
    assert np.allclose(g1, g2, rtol=1e-13, atol=1e-15)


def test_bce_agrees():
    s = Stream.from_root(3, "bce")
    z = _rand(s, 9, 4) * 5.0
    t = (s.uniform(36) > 0.5).astype(np.float64).reshape(9, 4)
    l1, s1 = cy.bce_logits_fwd(z, t)
    l2, s2 = _ops_py.bce_logits_fwd(z, t)
    assert abs(l1 - l2) < 1e-12
    assert np.allclose(s1, s2, rtol=1e-14)
    assert np.allclose(cy.bce_logits_bwd(s1, t, 0.25),
                       _ops_py.bce_logits_bwd(s2, t, 0.25), rtol=1e-13)


def test_power_norm_agrees_and_both_reject_zero_rows():
    s = Stream.from_root(4, "pn")
    x = _rand(s, 21, 24)
    gy = _rand(s, 21, 24)
    y1, s1 = cy.power_norm_fwd(x)
    y2, s2 = _ops_py.power_norm_fwd(x)
    assert np.allclose(y1, y2, rtol=1e-13)
    assert np.allclose(s1, s2, rtol=1e-13)
    assert np.allclose(cy.power_norm_bwd(x, s1, gy),
                       _ops_py.power_norm_bwd(x, s2, gy), rtol=1e-12, atol=1e-14)
    z = np.zeros((2, 4))
    for mod in (cy, _ops_py):
        with pytest.raises(ValueError):
            mod.power_norm_fwd(z)


def test_sumsq_diff_agrees():
    s = Stream.from_root(5, "sq")
    a = _rand(s, 14, 10)
    b = _rand(s, 14, 10)
    t1, d1 = cy.sumsq_diff(a, b)
    t2, d2 = _ops_py.sumsq_diff(a, b)
    assert abs(t1 - t2) < 1e-10 * max(1.0, abs(t2))
    assert np.array_equal(d1, d2)


def test_adam_step_agrees():
    s = Stream.from_root(6, "ad")
    p1 = _rand(s, 6, 5)
    g = _rand(s, 6, 5)
    p2 = p1.copy()
    m1 = np.zeros_like(p1)
    v1 = np.zeros_like(p1)
    m2 = np.zeros_like(p1)
    v2 = np.zeros_like(p1)
    for t in (1, 2, 3):
        cy.adam_step(p1, g, m1, v1, t, 1e-3, 0.9, 0.999, 1e-8)
        _ops_py.adam_step(p2, g, m2, v2, t, 1e-3, 0.9, 0.999, 1e-8)
    assert np.allclose(p1, p2, rtol=1e-13, atol=1e-16)
    assert np.allclose(m1, m2, rtol=1e-13)
    assert np.allclose(v1, v2, rtol=1e-13)


def test_same_backend_is_bitwise_reproducible():
    s = Stream.from_root(7, "rep")
    a = _rand(s, 12, 8)
    b = _rand(s, 8, 6)
    for mod in (cy, _ops_py):
        assert np.array_equal(mod.matmul(a, b), mod.matmul(a, b))
