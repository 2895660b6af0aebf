import math

import pytest

from moesemcom.covert import (
    CovertBudget,
    compression_dim,
    detection_free_prob,
    detection_opportunities,
    dfp_for_dim,
    mc_detection_free,
    payload_bits,
    transmission_time,
)
from moesemcom.errors import ConfigError
from moesemcom.prng import Stream

B = CovertBudget()


def test_compression_dims_on_supported_grid():
    assert compression_dim(32, 1.0) == 32
    assert compression_dim(32, 1.33) == 24
    assert compression_dim(32, 2.0) == 16
    assert compression_dim(32, 4.0) == 8


def test_compression_dim_rejects_degenerate():
    with pytest.raises(ConfigError):
        compression_dim(32, 64.0)
    with pytest.raises(ConfigError):
        compression_dim(32, -1.0)


def test_payload_and_airtime_default_budget():
    bits = payload_bits(32, B)
    assert bits == 32 * 8 * 5_000_000
    assert transmission_time(bits, B) == 2.56


def test_detection_opportunities_edges():
    assert detection_opportunities(0.0, B) == 0
    assert detection_opportunities(2.56, B) == 6  # 2 Hz * 2.56 s = 5.12
    assert detection_opportunities(1.5, B) == 3  # exact integer boundary
    # a product that is an integer only up to float rounding must not
    # round up an extra look
    assert detection_opportunities(0.1 + 0.2, B) == 1  # 2 * 0.30000000000000004
    with pytest.raises(ConfigError):
        detection_opportunities(-1.0, B)


def test_detection_free_prob_values():
    assert detection_free_prob(0, B) == 1.0
    assert abs(detection_free_prob(2, B) - 0.9025) < 1e-15
    assert abs(detection_free_prob(6, B) - 0.95**6) < 1e-15


def test_dfp_increases_with_compression():
    # widths for rho = 1, 1.33, 2, 4 under the default budget
    vals = [dfp_for_dim(compression_dim(32, r), B) for r in (1.0, 1.33, 2.0, 4.0)]
    assert vals == [0.95**6, 0.95**4, 0.95**3, 0.95**2]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_dfp_zero_payload_is_exactly_one():
    empty = CovertBudget(session_messages=0)
    assert dfp_for_dim(32, empty) == 1.0


def test_mc_oracle_matches_analytic_within_three_se():
    stream = Stream.from_root(99, "warden-mc")
    for n in (2, 3, 4, 6):
        est, se = mc_detection_free(n, B, 1_000_000, stream.child(n))
        assert abs(est - 0.95**n) <= 3.0 * se


def test_budget_validation():
    with pytest.raises(ConfigError):
        CovertBudget(miss_prob=1.5)
    with pytest.raises(ConfigError):
        CovertBudget(warden_rate_hz=0.0)
    with pytest.raises(ConfigError):
        CovertBudget(bits_per_value=0)
    with pytest.raises(ConfigError):
        mc_detection_free(2, B, 0, Stream.from_root(0, "x"))


def test_detection_free_prob_monotone_in_looks():
    vals = [detection_free_prob(n, B) for n in range(8)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(0.0 <= v <= 1.0 for v in vals)


def test_transmission_time_scales_linearly_with_dim():
    t = [transmission_time(payload_bits(d, B), B) for d in (8, 16, 24, 32)]
    assert t == [0.64, 1.28, 1.92, 2.56]
    assert math.isclose(t[3], 4 * t[0])
