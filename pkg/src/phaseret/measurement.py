"""Phaseless measurement operators.

Two forward models are provided, both built from the unitary FFT so their
normal operators have exact closed forms:

* :class:`CdpOperator` -- a stack of K random phase masks each followed by a
  2D Fourier transform. With unit-modulus masks and unitary FFTs the stack is
  a tight frame: ``A^H A = K I``.
* :class:`FourierOsOperator` -- zero-pad the image into a larger frame (the
  support is known) and take one Fourier transform; an exact isometry,
  ``A^H A = I``.

Operators map a real (or complex) H x W image to a flat complex measurement
vector of length m, and are immutable after construction.
"""

import numpy as np

from .field import fft2, ifft2, embed, crop, center_offset

__all__ = ["CdpOperator", "FourierOsOperator", "cdp_new", "operator_from_config"]


class CdpOperator:
    """Coded-diffraction-pattern stack: ``A x = [fft2(mask_k * x)]_{k=1..K}``.

    Masks have i.i.d. uniform-phase unit-modulus entries, drawn
    deterministically from ``seed``.
    """

    kind = "cdp"

    def __init__(self, shape, mask_count=4, seed=0):
        if mask_count < 1:
            raise ValueError("mask_count must be >= 1")
        self.shape = (int(shape[0]), int(shape[1]))
        self.mask_count = int(mask_count)
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(self.mask_count, *self.shape))
        self.masks = np.exp(1j * phases)
        self.masks.setflags(write=False)

    @property
    def n_measurements(self):
        return self.mask_count * self.shape[0] * self.shape[1]

    @property
    def gram_scale(self):
        """Scale of the normal operator: ``A^H A = gram_scale * I``."""
        return float(self.mask_count)

    def forward(self, x):
        x = np.asarray(x)
        if x.shape != self.shape:
            raise ValueError(f"expected image of shape {self.shape}, got {x.shape}")
        out = np.empty((self.mask_count, *self.shape), dtype=np.complex128)
        for k in range(self.mask_count):
            out[k] = fft2(self.masks[k] * x)
        return out.ravel()

    def adjoint(self, u):
        u = np.asarray(u, dtype=np.complex128)
        if u.size != self.n_measurements:
            raise ValueError(
                f"expected measurement vector of length {self.n_measurements}, got {u.size}"
            )
        blocks = u.reshape(self.mask_count, *self.shape)
        acc = np.zeros(self.shape, dtype=np.complex128)
        for k in range(self.mask_count):
            acc += np.conj(self.masks[k]) * ifft2(blocks[k])
        return acc

    def amplitude(self, x):
        return np.abs(self.forward(x))

    def to_config(self):
        return {
            "type": "cdp",
            "shape": list(self.shape),
            "K": self.mask_count,
            "seed": self.seed,
        }


class FourierOsOperator:
    """Oversampled Fourier transform of a support-constrained image.

    The image is placed at ``offset`` (default: centered) inside ``frame``
    and transformed. The default frame doubles each dimension, i.e. 4x
    oversampling in total.
    """

    kind = "fourier_os"

    def __init__(self, shape, frame=None, offset=None):
        self.shape = (int(shape[0]), int(shape[1]))
        if frame is None:
            frame = (2 * self.shape[0], 2 * self.shape[1])
        self.frame = (int(frame[0]), int(frame[1]))
        if self.frame[0] < self.shape[0] or self.frame[1] < self.shape[1]:
            raise ValueError("frame must be at least as large as the image")
        if offset is None:
            offset = center_offset(self.shape, self.frame)
        self.offset = (int(offset[0]), int(offset[1]))
        # validate placement once; embed re-checks but fails late otherwise
        embed(np.zeros(self.shape), self.frame, self.offset)

    @property
    def n_measurements(self):
        return self.frame[0] * self.frame[1]

    @property
    def gram_scale(self):
        return 1.0

    def support_mask(self):
        """Boolean frame-sized mask of the known support."""
        mask = np.zeros(self.frame, dtype=bool)
        r, c = self.offset
        mask[r : r + self.shape[0], c : c + self.shape[1]] = True
        return mask

    def forward(self, x):
        x = np.asarray(x)
        if x.shape != self.shape:
            raise ValueError(f"expected image of shape {self.shape}, got {x.shape}")
        return fft2(embed(x, self.frame, self.offset)).ravel()

    def adjoint(self, u):
        u = np.asarray(u, dtype=np.complex128)
        if u.size != self.n_measurements:
            raise ValueError(
                f"expected measurement vector of length {self.n_measurements}, got {u.size}"
            )
        return crop(ifft2(u.reshape(self.frame)), self.shape, self.offset)

    def amplitude(self, x):
        return np.abs(self.forward(x))

    def to_config(self):
        return {
            "type": "fourier_os",
            "shape": list(self.shape),
            "frame": list(self.frame),
            "offset": list(self.offset),
        }


def cdp_new(shape, mask_count=4, seed=0):
    """Draw a fresh K-mask CDP operator (deterministic per seed)."""
    return CdpOperator(shape, mask_count=mask_count, seed=seed)


def operator_from_config(cfg):
    """Rebuild an operator from its JSON description (see ``to_config``)."""
    kind = cfg["type"]
    if kind == "cdp":
        return CdpOperator(cfg["shape"], mask_count=cfg.get("K", 4), seed=cfg.get("seed", 0))
    if kind == "fourier_os":
        return FourierOsOperator(
            cfg["shape"], frame=cfg.get("frame"), offset=cfg.get("offset")
        )
    raise ValueError(f"unknown operator type {kind!r}")
