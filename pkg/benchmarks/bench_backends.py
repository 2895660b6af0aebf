"""Micro-benchmark of the compiled kernels against the plain numpy ones.

Imports both kernel modules directly (the MOESEMCOM_BACKEND switch picks
one at package import; here we want both side by side) and times each
kernel on training-shaped inputs. With --end-to-end it also times a short
training run per backend in subprocesses, since the selection is frozen
per process.

Usage:
    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --repeats 9 --end-to-end
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from moesemcom.backends import _ops_py  # noqa: E402
from moesemcom.prng import Stream  # noqa: E402

try:
    from moesemcom.backends import _ops_cy
except ImportError:
    _ops_cy = None


def _inputs():
    """One dict of arguments per kernel, shaped like real training batches."""
    s = Stream.from_root(0, "bench")
    x_wide = s.normal(64 * 256).reshape(64, 256)
    w_wide = s.normal(256 * 128).reshape(256, 128)
    h = s.normal(64 * 128).reshape(64, 128)
    gy = s.normal(64 * 128).reshape(64, 128)
    logits = s.normal(64 * 8).reshape(64, 8)
    labels = s.integers(64, 8)
    probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    z = s.normal(64 * 4).reshape(64, 4)
    t = (s.uniform(64 * 4).reshape(64, 4) > 0.5).astype(float)
    sig = 1.0 / (1.0 + np.exp(-z))
    sym = s.normal(64 * 32).reshape(64, 32)
    sym2 = s.normal(64 * 32).reshape(64, 32)
    scales = np.sqrt(32.0 / np.einsum("ij,ij->i", sym, sym))
    p = s.normal(256 * 128).reshape(256, 128)
    g = s.normal(256 * 128).reshape(256, 128)

    return [
        ("matmul 64x256 @ 256x128", "matmul", (x_wide, w_wide)),
        ("matmul_tn 64x256.T @ 64x128", "matmul_tn", (x_wide, gy)),
        ("matmul_nt 64x128 @ (256x128).T", "matmul_nt", (h, w_wide)),
        ("relu_fwd 64x128", "relu_fwd", (h,)),
        ("relu_bwd 64x128", "relu_bwd", (h, gy)),
        ("logistic 64x128", "logistic", (h,)),
        ("softmax_xent_fwd 64x8", "softmax_xent_fwd", (logits, labels)),
        ("softmax_xent_bwd 64x8", "softmax_xent_bwd",
         (probs, labels, 1.0 / 64)),
        ("bce_logits_fwd 64x4", "bce_logits_fwd", (z, t)),
        ("bce_logits_bwd 64x4", "bce_logits_bwd", (sig, t, 1.0 / 256)),
        ("power_norm_fwd 64x32", "power_norm_fwd", (sym,)),
        ("power_norm_bwd 64x32", "power_norm_bwd", (sym, scales, sym2)),
        ("sumsq_diff 64x32", "sumsq_diff", (sym, sym2)),
        ("adam_step 256x128", "adam_step",
         (p, g, np.zeros_like(p), np.zeros_like(p), 1, 1e-3, 0.9, 0.999,
          1e-8)),
    ]


def _time_call(fn, args, repeats, inner=200):
    """Median seconds per call; each sample runs the kernel `inner` times."""
    samples = []
    for _ in range(repeats):
        fresh = tuple(a.copy() if isinstance(a, np.ndarray) else a
                      for a in args)
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*fresh)
        samples.append((time.perf_counter() - t0) / inner)
    return statistics.median(samples)


def bench_kernels(repeats):
    rows = []
    for label, name, args in _inputs():
        py = _time_call(getattr(_ops_py, name), args, repeats)
        if _ops_cy is not None:
            cy = _time_call(getattr(_ops_cy, name), args, repeats)
            rows.append((label, py, cy, py / cy))
        else:
            rows.append((label, py, None, None))
    return rows


def bench_end_to_end():
    """Time a short training run under each backend in a fresh process."""
    code = (
        "import time; from moesemcom.data import make_dataset; "
        "from moesemcom.experts.training import train_normal; "
        "ds = make_dataset(k=8, n_train=1024, n_test=128, seed=0); "
        "t0 = time.perf_counter(); train_normal(ds, 0, epochs=8); "
        "print(time.perf_counter() - t0)"
    )
    out = {}
    for backend in ("python", "cython"):
        env = dict(os.environ, MOESEMCOM_BACKEND=backend)
        proc = subprocess.run([sys.executable, "-c", code], env=env,
                              capture_output=True, text=True)
        out[backend] = (float(proc.stdout.strip())
                        if proc.returncode == 0 else None)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeats", type=int, default=5,
                    help="timing samples per kernel (median reported)")
    ap.add_argument("--end-to-end", action="store_true",
                    help="also time a short training run per backend")
    args = ap.parse_args()

    if _ops_cy is None:
        print("compiled backend not importable; timing numpy kernels only\n")

    width = max(len(r[0]) for r in _inputs()) + 2
    print(f"{'kernel':<{width}}{'numpy':>12}{'compiled':>12}{'speedup':>10}")
    for label, py, cy, ratio in bench_kernels(args.repeats):
        cy_s = f"{cy * 1e6:.2f}us" if cy is not None else "-"
        r_s = f"{ratio:.2f}x" if ratio is not None else "-"
        print(f"{label:<{width}}{py * 1e6:>10.2f}us{cy_s:>12}{r_s:>10}")

    if args.end_to_end:
        print("\nend to end (train_normal, 1024 samples, 8 epochs):")
        for backend, seconds in bench_end_to_end().items():
            shown = f"{seconds:.2f}s" if seconds is not None else "failed"
            print(f"  {backend:<8} {shown}")


if __name__ == "__main__":
    main()
