"""Denoiser-residual regularizer: value, gradient, and proximal recursion.

The regularizer is ``R(x) = (lam/2) <x, x - D(x, sigma)>`` with a pluggable
denoiser D. Its gradient is ``lam * (x - D(x))`` -- exact when D is linear
and self-adjoint (the Gaussian blur denoiser), and the working approximation
otherwise. The proximal map is evaluated by the damped fixed-point recursion

    v_0 = z,   v_k = (z + lam * D(v_{k-1})) / (1 + lam)

which converges to ``argmin_x 0.5||x - z||^2 + R(x)`` for linear self-adjoint
passive D; for nonlinear denoisers the recursion itself is the definition
used by the solver. One inner iteration is the practical default (and the
only case most runs exercise).
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["RedConfig", "red_value", "red_grad", "red_prox"]


@dataclass(frozen=True)
class RedConfig:
    """Weight, denoiser binding, and inner iteration count of the regularizer."""

    lam: float
    denoiser: callable
    sigma: float
    inner_iters: int = 1

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.inner_iters < 1:
            raise ValueError("inner_iters must be >= 1")

    def with_lam(self, lam):
        return RedConfig(lam, self.denoiser, self.sigma, self.inner_iters)


def red_value(x, cfg):
    """``(lam/2) <x, x - D(x)>`` with the real inner product."""
    if cfg.lam == 0:
        return 0.0
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * cfg.lam * float(np.sum(x * (x - cfg.denoiser(x, cfg.sigma))))


def red_grad(x, cfg):
    """``lam * (x - D(x))``; exact for linear self-adjoint D."""
    x = np.asarray(x, dtype=np.float64)
    if cfg.lam == 0:
        return np.zeros_like(x)
    return cfg.lam * (x - cfg.denoiser(x, cfg.sigma))


def red_prox(z, cfg):
    """Run ``inner_iters`` steps of the damped denoising recursion from z."""
    z = np.asarray(z, dtype=np.float64)
    if cfg.lam == 0:
        return z.copy()
    v = z
    for _ in range(cfg.inner_iters):
        v = (z + cfg.lam * cfg.denoiser(v, cfg.sigma)) / (1.0 + cfg.lam)
    return v
