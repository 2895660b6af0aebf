"""Datasets: procedural 16x16 glyph signs and a binary PGM/PPM loader.

The synthetic set is the default workload. Eight glyph classes are rendered
from soft inside/outside functions on the pixel grid, with per-sample
translation (up to 2 px), scale (up to 15 percent), foreground contrast
(0.45 to 0.80) and additive pixel noise (sigma 0.05), everything drawn from
named streams of the given seed. Labels are assigned round robin, so class
counts differ by at most one. The contrast jitter matters: it keeps glyph
pixels off the saturation rails, so pixel-budget tampering has room to work
and robustness comparisons measure the codec, not the clipping.

Real images come in as binary PGM (P5) or PPM (P6) files laid out one
subdirectory per class; they are converted to grayscale luma, resized
bilinearly to 16x16 and split deterministically by file index (every fifth
file is test).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .prng import Stream

GRID = 16
N_PIXELS = GRID * GRID

CLASS_NAMES = (
    "circle", "square", "triangle", "cross",
    "bar", "ring", "diamond", "chevron",
)

_EDGE = 0.18  # soft edge width in glyph-local units


@dataclass
class DatasetSplit:
    """Flattened images in [0,1], int64 labels, and the class count."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    k: int
    seed: int
    class_names: tuple

    def image(self, split: str, i: int) -> np.ndarray:
        x = self.x_train if split == "train" else self.x_test
        return x[i].reshape(GRID, GRID)


def _soft(margin: np.ndarray) -> np.ndarray:
    """margin >= 0 inside the shape; returns intensity in [0,1]."""
    return np.clip(margin / _EDGE + 0.5, 0.0, 1.0)


def _render(name: str, cx: float, cy: float, radius: float) -> np.ndarray:
    yy, xx = np.mgrid[0:GRID, 0:GRID].astype(np.float64)
    u = (xx - cx) / radius
    v = (yy - cy) / radius
    r = np.sqrt(u * u + v * v)
    au, av = np.abs(u), np.abs(v)
    if name == "circle":
        m = 1.0 - r
    elif name == "square":
        m = 0.78 - np.maximum(au, av)
    elif name == "triangle":
        # apex up: vertices near (0,-1), (+-1, 0.8)
        m = np.minimum(0.8 - v, (v + 1.0) - 2.25 * au)
    elif name == "cross":
        arm = np.minimum(np.maximum(au - 0.3, av - 1.0),
                         np.maximum(av - 0.3, au - 1.0))
        m = -arm
    elif name == "bar":
        m = np.minimum(0.3 - av, 1.0 - au)
    elif name == "ring":
        m = np.minimum(1.0 - r, r - 0.52)
    elif name == "diamond":
        m = 1.05 - (au + av)
    elif name == "chevron":
        m = 0.24 - np.abs(v - (0.8 * au - 0.4))
        m = np.minimum(m, 1.0 - au)
    else:
        raise ValueError(f"unknown glyph: {name}")
    return _soft(m)


def class_template(label: int, k: int = len(CLASS_NAMES)) -> np.ndarray:
    """Clean centered glyph for a class, as a (16,16) array."""
    if not 0 <= label < k:
        raise ValueError("label out of range")
    return _render(CLASS_NAMES[label], 7.5, 7.5, 5.2)


def make_dataset(k: int = 8, n_train: int = 4000, n_test: int = 1000,
                 seed: int = 0) -> DatasetSplit:
    if not 2 <= k <= len(CLASS_NAMES):
        raise ConfigError(f"k must be in [2, {len(CLASS_NAMES)}], got {k}")

    def build(n: int, tag: str) -> tuple[np.ndarray, np.ndarray]:
        geo = Stream.from_root(seed, "data", tag, "geometry")
        pix = Stream.from_root(seed, "data", tag, "pixel-noise")
        tx = geo.uniform(n) * 4.0 - 2.0
        ty = geo.uniform(n) * 4.0 - 2.0
        sc = 1.0 + (geo.uniform(n) * 0.30 - 0.15)
        contrast = 0.45 + geo.uniform(n) * 0.35
        labels = np.arange(n, dtype=np.int64) % k
        x = np.empty((n, N_PIXELS))
        for i in range(n):
            img = _render(CLASS_NAMES[labels[i]],
                          7.5 + tx[i], 7.5 + ty[i], 5.2 * sc[i])
            x[i] = img.reshape(-1) * contrast[i]
        x += pix.normal(n * N_PIXELS, sigma=0.05).reshape(n, N_PIXELS)
        np.clip(x, 0.0, 1.0, out=x)
        return x, labels

    x_tr, y_tr = build(n_train, "train")
    x_te, y_te = build(n_test, "test")
    return DatasetSplit(x_tr, y_tr, x_te, y_te, k, seed, CLASS_NAMES[:k])


def nearest_template_accuracy(ds: DatasetSplit, split: str = "train") -> float:
    """Fraction of samples whose nearest pose-bank template has the right
    class, matching by cosine similarity so the contrast jitter drops out.
    The bank holds each glyph at a grid of shifts and scales covering the
    jitter ranges; this is a model-free separability check for the
    synthetic set."""
    if ds.class_names != CLASS_NAMES[:ds.k]:
        raise ValueError("template matching only applies to the synthetic set")
    bank, owner = [], []
    for ci in range(ds.k):
        for dx in (-2, -1, 0, 1, 2):
            for dy in (-2, -1, 0, 1, 2):
                for sc in (0.85, 0.925, 1.0, 1.075, 1.15):
                    t = _render(CLASS_NAMES[ci], 7.5 + dx, 7.5 + dy,
                                5.2 * sc).reshape(-1)
                    bank.append(t / np.linalg.norm(t))
                    owner.append(ci)
    bank_arr = np.stack(bank)
    owner_arr = np.array(owner)
    x = ds.x_train if split == "train" else ds.x_test
    y = ds.y_train if split == "train" else ds.y_test
    xn = x / np.maximum(np.linalg.norm(x, axis=1, keepdims=True), 1e-12)
    pred = owner_arr[(xn @ bank_arr.T).argmax(axis=1)]
    return float((pred == y).mean())


def batches(n: int, batch_size: int, stream: Stream):
    """Index batches for one epoch: a fresh seeded permutation each call,
    short final batch kept."""
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")
    perm = stream.permutation(n)
    for lo in range(0, n, batch_size):
        yield perm[lo:lo + batch_size]


# ------------------------------------------------------------- file input


def save_dataset(ds: DatasetSplit, path) -> None:
    """Persist a split as .npz so later commands reuse identical samples."""
    np.savez(path, x_train=ds.x_train, y_train=ds.y_train,
             x_test=ds.x_test, y_test=ds.y_test,
             k=np.int64(ds.k), seed=np.uint64(ds.seed),
             class_names=np.array(ds.class_names, dtype="U"))


def load_dataset(path) -> DatasetSplit:
    try:
        with np.load(path, allow_pickle=False) as z:
            return DatasetSplit(
                np.asarray(z["x_train"], dtype=np.float64),
                np.asarray(z["y_train"], dtype=np.int64),
                np.asarray(z["x_test"], dtype=np.float64),
                np.asarray(z["y_test"], dtype=np.int64),
                int(z["k"]), int(z["seed"]),
                tuple(str(c) for c in z["class_names"]),
            )
    except FileNotFoundError:
        raise
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"unreadable dataset file {path}: {exc}") from None


def _read_netpbm(path: str) -> np.ndarray:
    """Binary PGM/PPM to a grayscale float array in [0,1]."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] not in (b"P5", b"P6"):
        raise ValueError(f"{path}: not a binary PGM/PPM file")
    color = raw[:2] == b"P6"

    # tokenize the header: magic, width, height, maxval; '#' starts a comment
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos] in b" \t\r\n":
            pos += 1
        if pos < len(raw) and raw[pos] == ord("#"):
            while pos < len(raw) and raw[pos] != ord("\n"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and raw[pos] not in b" \t\r\n":
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated header")
        fields.append(int(raw[start:pos]))
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit images are supported")
    need = w * h * (3 if color else 1)
    data = raw[pos:pos + need]
    if len(data) < need:
        raise ValueError(f"{path}: pixel data truncated")
    arr = np.frombuffer(data, dtype=np.uint8).astype(np.float64) / 255.0
    if color:
        arr = arr.reshape(h, w, 3)
        return 0.299 * arr[:, :, 0] + 0.587 * arr[:, :, 1] + 0.114 * arr[:, :, 2]
    return arr.reshape(h, w)


def resize_bilinear(img: np.ndarray, out_h: int = GRID, out_w: int = GRID) -> np.ndarray:
    """Pixel-center aligned bilinear resample."""
    h, w = img.shape
    ys = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - fx) + img[np.ix_(y0, x1)] * fx
    bot = img[np.ix_(y1, x0)] * (1 - fx) + img[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def load_image_dir(root: str, seed: int = 0) -> DatasetSplit:
    """One subdirectory per class, files sorted by name; every fifth file
    (index % 5 == 4) goes to the test split."""
    classes = sorted(
        d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d))
    )
    if len(classes) < 2:
        raise ConfigError(f"{root}: need at least two class subdirectories")
    xs_tr, ys_tr, xs_te, ys_te = [], [], [], []
    for label, cname in enumerate(classes):
        cdir = os.path.join(root, cname)
        files = sorted(
            f for f in os.listdir(cdir)
            if f.lower().endswith((".pgm", ".ppm"))
        )
        if not files:
            raise ConfigError(f"{cdir}: no PGM/PPM files")
        for i, fname in enumerate(files):
            img = resize_bilinear(_read_netpbm(os.path.join(cdir, fname)))
            target_x, target_y = (xs_te, ys_te) if i % 5 == 4 else (xs_tr, ys_tr)
            target_x.append(img.reshape(-1))
            target_y.append(label)
    return DatasetSplit(
        np.array(xs_tr), np.array(ys_tr, dtype=np.int64),
        np.array(xs_te) if xs_te else np.empty((0, N_PIXELS)),
        np.array(ys_te, dtype=np.int64),
        len(classes), seed, tuple(classes),
    )
