"""Real-valued AWGN channel.

Transmit symbols are power normalized (mean squared entry 1 per block), so
an SNR of s dB means noise variance 10**(-s/10). Noise is drawn from a named
stream; training and evaluation inject it through add_const so gradients
pass straight through to the symbols.
"""

from __future__ import annotations

import math

import numpy as np

from .prng import Stream


def noise_variance(snr_db: float) -> float:
    """Noise variance against unit signal power."""
    return 10.0 ** (-snr_db / 10.0)


def noise_block(n: int, m: int, snr_db: float, stream: Stream) -> np.ndarray:
    """(n, m) AWGN draw at the given SNR."""
    sigma = math.sqrt(noise_variance(snr_db))
    return stream.normal(n * m, sigma=sigma).reshape(n, m)


def apply_awgn(symbols: np.ndarray, snr_db: float, stream: Stream) -> np.ndarray:
    return symbols + noise_block(symbols.shape[0], symbols.shape[1], snr_db, stream)


def empirical_snr_db(sent: np.ndarray, received: np.ndarray) -> float:
    """Measured SNR from a sent/received pair."""
    p_sig = float(np.mean(sent * sent))
    p_noise = float(np.mean((received - sent) ** 2))
    if p_noise == 0.0:
        raise ValueError("received equals sent; SNR is unbounded")
    return 10.0 * math.log10(p_sig / p_noise)
