"""Unitary 2D transforms and zero-padding embeddings.

Images and fields are plain 2D numpy arrays: real images are float64 with a
nominal dynamic range of [0, 255], complex fields are complex128. All
functions here are pure and preserve norms where stated, which is what makes
the measurement operators built on top of them tight frames.
"""

import numpy as np

__all__ = ["fft2", "ifft2", "embed", "crop", "center_offset"]


def _check_finite(f, name):
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{name} contains non-finite entries")


def fft2(f):
    """Unitary 2D DFT (norm preserved: ||fft2(f)|| = ||f||)."""
    f = np.asarray(f)
    _check_finite(f, "fft2 input")
    return np.fft.fft2(f, norm="ortho")


def ifft2(f):
    """Unitary inverse 2D DFT; exact inverse and adjoint of :func:`fft2`."""
    f = np.asarray(f)
    _check_finite(f, "ifft2 input")
    return np.fft.ifft2(f, norm="ortho")


def center_offset(shape, frame):
    """Top-left offset that centers a ``shape`` block inside ``frame``."""
    return ((frame[0] - shape[0]) // 2, (frame[1] - shape[1]) // 2)


def embed(x, frame, offset=None):
    """Zero-pad ``x`` into a ``frame``-sized complex field at ``offset``.

    ``offset`` is the (row, col) of the top-left corner; defaults to centered.
    Raises if the image does not fit inside the frame at that position.
    """
    x = np.asarray(x)
    h, w = x.shape
    fh, fw = frame
    if offset is None:
        offset = center_offset(x.shape, frame)
    r, c = offset
    if r < 0 or c < 0 or r + h > fh or c + w > fw:
        raise ValueError(
            f"embedding a {h}x{w} image at offset {offset} exceeds the {fh}x{fw} frame"
        )
    out = np.zeros(frame, dtype=np.complex128)
    out[r : r + h, c : c + w] = x
    return out


def crop(u, shape, offset=None):
    """Extract the ``shape`` block at ``offset``; exact adjoint of :func:`embed`."""
    u = np.asarray(u)
    h, w = shape
    fh, fw = u.shape
    if offset is None:
        offset = center_offset(shape, u.shape)
    r, c = offset
    if r < 0 or c < 0 or r + h > fh or c + w > fw:
        raise ValueError(
            f"cropping a {h}x{w} block at offset {offset} exceeds the {fh}x{fw} frame"
        )
    return u[r : r + h, c : c + w].copy()
