"""Grayscale image I/O (8-bit PGM/PNG) and synthetic test images.

No photographs are bundled: the benchmark ships with deterministic synthetic
stand-ins (piecewise-smooth shapes, rings, and textured ramps) spanning the
kinds of structure natural test sets exercise. Real images can be dropped in
as PGM or 8-bit grayscale PNG files.
"""

import numpy as np
from PIL import Image

__all__ = [
    "SYNTHETIC_KINDS",
    "load_image",
    "save_pgm",
    "synthetic_image",
    "synthetic_suite",
]


def _read_pgm_tokens(fh, count):
    tokens = []
    while len(tokens) < count:
        line = fh.readline()
        if not line:
            raise ValueError("truncated PGM header")
        line = line.split(b"#", 1)[0]
        tokens.extend(line.split())
    return tokens


def load_image(path):
    """Load an 8-bit grayscale image as float64 in [0, 255].

    Supports binary PGM (P5, maxval <= 255) and 8-bit grayscale PNG; anything
    else is rejected with the offending property named.
    """
    path = str(path)
    if path.lower().endswith((".pgm", ".pnm")):
        with open(path, "rb") as fh:
            magic = fh.readline().split(b"#", 1)[0].strip()
            if magic != b"P5":
                raise ValueError(f"unsupported PGM magic {magic!r} (only binary P5)")
            w, h, maxval = (int(t) for t in _read_pgm_tokens(fh, 3))
            if maxval > 255:
                raise ValueError(f"PGM maxval {maxval} exceeds 8-bit range")
            raw = fh.read(w * h)
            if len(raw) != w * h:
                raise ValueError("truncated PGM pixel data")
        return np.frombuffer(raw, dtype=np.uint8).reshape(h, w).astype(np.float64)

    with Image.open(path) as im:
        if im.mode != "L":
            if im.mode in ("I", "I;16", "I;16B", "I;16L"):
                raise ValueError(f"{path}: 16-bit depth unsupported (need 8-bit grayscale)")
            raise ValueError(f"{path}: mode {im.mode!r} unsupported (need 8-bit grayscale)")
        return np.asarray(im, dtype=np.float64)


def save_pgm(path, img):
    """Write a float image as binary P5 PGM (rounded and clipped to [0, 255])."""
    img = np.asarray(img, dtype=np.float64)
    data = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


SYNTHETIC_KINDS = ("blobs", "boxes", "cells", "scene")


def synthetic_image(kind, size=64, seed=0):
    """Deterministic nonnegative test image of the given kind, range [0, 255].

    The kinds mirror the image classes phase-retrieval benchmarks use:
    smooth bright structures on dark backgrounds (galaxy/specimen-like),
    piecewise-constant man-made structure, fields of small particles, and a
    piecewise-smooth scene with mild texture.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)

    if kind == "blobs":
        img = np.zeros((size, size))
        for _ in range(6):
            cy, cx = rng.uniform(0.15, 0.85, 2) * size
            s = rng.uniform(0.06, 0.18) * size
            amp = rng.uniform(0.4, 1.0)
            img += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s**2))
    elif kind == "boxes":
        img = np.full((size, size), 0.1)
        margin = max(1, size - max(4, size // 8))
        for _ in range(7):
            r0, c0 = rng.integers(0, margin, 2)
            rh = rng.integers(max(2, size // 8), max(3, size // 2))
            cw = rng.integers(max(2, size // 8), max(3, size // 2))
            img[r0 : min(size, r0 + rh), c0 : min(size, c0 + cw)] += rng.uniform(0.15, 0.5)
    elif kind == "cells":
        img = np.full((size, size), 0.04)
        for _ in range(max(6, size // 3)):
            cy, cx = rng.uniform(0.08, 0.92, 2) * size
            s = rng.uniform(0.02, 0.05) * size
            amp = rng.uniform(0.35, 1.0)
            img += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s**2))
    elif kind == "scene":
        img = 0.25 + 0.3 * xx / size + 0.15 * yy / size
        disk = (yy - 0.38 * size) ** 2 + (xx - 0.33 * size) ** 2 < (0.22 * size) ** 2
        img[disk] = 0.85
        img[int(0.62 * size) :, int(0.52 * size) :] = 0.12
        stripe = (yy > 0.1 * size) & (yy < 0.22 * size)
        img[stripe] += 0.05 * np.sin(2 * np.pi * xx / (0.2 * size))[stripe]
        img += 0.03 * np.sin(2 * np.pi * (0.04 * xx + 0.06 * yy + rng.random()))
    else:
        raise ValueError(f"unknown synthetic image kind {kind!r}; have {SYNTHETIC_KINDS}")

    img -= img.min()
    peak = img.max()
    if peak > 0:
        img /= peak
    return 10.0 + 235.0 * img


def synthetic_suite(size=64, seed=0):
    """Ordered dict of one image per kind, seeded per kind for variety."""
    return {
        kind: synthetic_image(kind, size=size, seed=seed + 17 * i)
        for i, kind in enumerate(SYNTHETIC_KINDS)
    }
