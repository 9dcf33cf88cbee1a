"""Shot-noise channel on intensities and the derived noise-scale estimate.

Intensities are corrupted with signal-dependent Gaussian noise,
``y^2 = |z|^2 + w`` with ``w ~ N(0, alpha^2 |z|^2)`` per entry, a standard
Gaussian stand-in for rescaled-Poisson photon noise. Negative intensities
are clamped to zero before the square root so that y stays real and
nonnegative.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = ["PhaselessData", "sample_shot_noise", "noise_std_estimate"]

_MAGIC = b"PRYD"


@dataclass(frozen=True)
class PhaselessData:
    """Observed amplitudes ``y`` (flat, nonnegative) and the noise scale alpha."""

    y: np.ndarray
    alpha: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite entries")
        if y.size and y.min() < 0:
            raise ValueError("y must be nonnegative")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def sigma_w_bar(self):
        """Estimated std of the intensity noise (cached)."""
        if "sigma_w_bar" not in self._cache:
            self._cache["sigma_w_bar"] = noise_std_estimate(self)
        return self._cache["sigma_w_bar"]

    def save(self, path):
        """Flat binary format: magic, u32 length, f64 alpha, f64[m] y (LE)."""
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", self.y.size))
            fh.write(struct.pack("<d", self.alpha))
            fh.write(self.y.astype("<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _MAGIC:
                raise ValueError(f"bad magic {magic!r}, expected {_MAGIC!r}")
            (m,) = struct.unpack("<I", fh.read(4))
            (alpha,) = struct.unpack("<d", fh.read(8))
            raw = fh.read(8 * m)
            if len(raw) != 8 * m:
                raise ValueError("truncated data file")
            y = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        return cls(y=y, alpha=alpha)


def sample_shot_noise(z, alpha, seed):
    """Draw noisy amplitudes from complex measurements ``z``.

    Per entry: ``I = |z|^2 + alpha*|z|*xi`` with standard normal ``xi``,
    clamped at zero, and ``y = sqrt(I)``. Deterministic per seed.
    """
    z = np.asarray(z).ravel()
    if not np.all(np.isfinite(z)):
        raise ValueError("z contains non-finite entries")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    mag = np.abs(z)
    if alpha == 0:
        return PhaselessData(y=mag, alpha=0.0)
    rng = np.random.default_rng(seed)
    w = alpha * mag * rng.standard_normal(mag.size)
    intensity = np.maximum(mag**2 + w, 0.0)
    return PhaselessData(y=np.sqrt(intensity), alpha=float(alpha))


def noise_std_estimate(data):
    """Plug-in estimate ``sigma_w_bar = alpha * RMS(y)`` of the intensity-noise std.

    ``Var[w] = alpha^2 |z|^2`` per entry and y is the available proxy for |z|.
    """
    if data.y.size == 0:
        raise ValueError("cannot estimate noise std from empty measurements")
    return float(data.alpha * np.sqrt(np.mean(data.y**2)))
