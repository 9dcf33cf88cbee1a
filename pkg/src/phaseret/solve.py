"""Solvers for amplitude-only recovery.

``fasta_solve`` minimizes ``0.5||y - |Ax|||^2 + (lam/2)<x, x - D(x)>`` by
forward-backward splitting with Barzilai-Borwein steps and a nonmonotone
backtracking line search; the proximal step uses the denoising recursion
with the step-scaled weight ``tau*lam``, matching the prox(z, tau)
convention of adaptive FBS solvers.

Two line-search modes exist, selected by the window size. With ``window > 1``
(default 10) the backtracking condition is the standard local quadratic
model of the smooth term over the recent window, which is what lets the
strong-denoising regime at high noise levels make progress even though the
regularizer value rises as structure is recovered. With ``window == 1`` the
solver instead enforces strict descent of the full objective at every
accepted step, reproducing the monotone cost trajectories the method is
known for, and then the best-objective iterate is also the last.

``hio_run`` is the classic hybrid input-output alternating projection with
feedback parameter beta, and ``waf_run`` is plain fixed-step gradient descent
on the amplitude loss. ``prdeep_run`` chains solver stages over a denoiser
bank with decreasing noise levels, warm-starting each stage from the last.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .field import embed, crop
from .red import RedConfig, red_prox, red_value

__all__ = [
    "FastaOptions",
    "HioOptions",
    "SolverAbort",
    "SolverTrace",
    "amp_loss",
    "amp_loss_subgrad",
    "fasta_solve",
    "hio_run",
    "intensity_loss",
    "intensity_loss_grad",
    "prdeep_run",
    "waf_run",
]


def amp_loss(y, z):
    """Amplitude data fidelity ``0.5 * sum((y_i - |z_i|)^2)``."""
    y = np.asarray(y).ravel()
    z = np.asarray(z).ravel()
    if y.size != z.size:
        raise ValueError(f"length mismatch: y has {y.size}, z has {z.size}")
    return 0.5 * float(np.sum((y - np.abs(z)) ** 2))


def amp_loss_subgrad(z, y):
    """Subgradient ``z - y * z/|z|`` of the amplitude loss w.r.t. z.

    At ``z_i = 0`` the kink admits 0 as a valid element, so the y term is
    dropped there.
    """
    z = np.asarray(z).ravel()
    y = np.asarray(y).ravel()
    if y.size != z.size:
        raise ValueError(f"length mismatch: y has {y.size}, z has {z.size}")
    mag = np.abs(z)
    unit = np.divide(z, mag, out=np.zeros_like(z), where=mag > 0)
    return z - y * unit


def intensity_loss(y, z):
    """Quadratic intensity fidelity ``0.5 * sum((y_i^2 - |z_i|^2)^2)``."""
    y = np.asarray(y).ravel()
    z = np.asarray(z).ravel()
    if y.size != z.size:
        raise ValueError(f"length mismatch: y has {y.size}, z has {z.size}")
    return 0.5 * float(np.sum((y**2 - np.abs(z) ** 2) ** 2))


def intensity_loss_grad(z, y):
    """Gradient ``2(|z|^2 - y^2) z`` of the intensity loss w.r.t. z."""
    z = np.asarray(z).ravel()
    y = np.asarray(y).ravel()
    if y.size != z.size:
        raise ValueError(f"length mismatch: y has {y.size}, z has {z.size}")
    return 2.0 * (np.abs(z) ** 2 - y**2) * z


_LOSSES = {
    "amplitude": (amp_loss, amp_loss_subgrad),
    "intensity": (intensity_loss, intensity_loss_grad),
}


@dataclass
class FastaOptions:
    """Knobs of the adaptive forward-backward solver."""

    max_iters: int = 200
    step0: float = None  # estimated from a local Lipschitz probe when None
    shrink: float = 0.5
    window: int = 10
    tol: float = 1e-6
    bb: bool = True
    linesearch_c: float = 0.05
    max_backtracks: int = 20
    step_growth: float = 2.0  # cap on per-iteration step expansion
    loss: str = "amplitude"

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must be in (0, 1)")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.loss not in _LOSSES:
            raise ValueError(f"loss must be one of {sorted(_LOSSES)}")


@dataclass
class SolverTrace:
    """Per-iteration audit log of one solver run."""

    objective: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    step: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    status: str = "running"

    def append(self, objective, residual, step, accepted):
        self.objective.append(float(objective))
        self.residual.append(float(residual))
        self.step.append(float(step))
        self.accepted.append(bool(accepted))

    def __len__(self):
        return len(self.objective)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "objective", "residual", "step", "accepted"])
            for i in range(len(self.objective)):
                writer.writerow(
                    [
                        i,
                        repr(self.objective[i]),
                        repr(self.residual[i]),
                        repr(self.step[i]),
                        int(self.accepted[i]),
                    ]
                )

    @classmethod
    def from_csv(cls, path):
        trace = cls(status="loaded")
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                trace.append(
                    float(row["objective"]),
                    float(row["residual"]),
                    float(row["step"]),
                    bool(int(row["accepted"])),
                )
        return trace


class SolverAbort(RuntimeError):
    """Raised when the objective turns non-finite; carries the partial trace."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def _estimate_step(x0, grad0, grad_at):
    """Inverse local Lipschitz estimate probed along the starting gradient.

    Probing along grad0 keeps the estimate odd-symmetric (same step for
    +-x0), which makes solver runs mirror exactly under global sign flips.
    """
    gnorm = float(np.linalg.norm(grad0))
    if gnorm == 0 or not np.isfinite(gnorm):
        return 1.0
    d = grad0 / gnorm
    delta = 1e-3 * max(1.0, float(np.max(np.abs(x0))))
    g1 = grad_at(x0 + delta * d)
    lip = np.linalg.norm(g1 - grad0) / delta
    if not np.isfinite(lip) or lip <= 0:
        return 1.0
    return 1.0 / lip


def fasta_solve(op, data, red_cfg, x0, opts=None):
    """Minimize the phaseless data fidelity plus denoiser regularizer.

    Returns ``(xhat, SolverTrace)``; in the monotone mode (``window == 1``)
    ``xhat`` is the best-objective iterate (which descent makes the last),
    otherwise the final iterate of the windowed search. ``red_cfg`` may be
    None for a pure data-fidelity run.
    """
    opts = opts or FastaOptions()
    monotone = opts.window == 1
    loss_fn, loss_grad = _LOSSES[opts.loss]
    y = data.y
    x = np.asarray(x0, dtype=np.float64).copy()

    def smooth_grad(xv):
        return op.adjoint(loss_grad(op.forward(xv), y)).real

    def reg_value(xv):
        return red_value(xv, red_cfg) if red_cfg is not None else 0.0

    z = op.forward(x)
    grad = op.adjoint(loss_grad(z, y)).real
    f = loss_fn(y, z)
    obj = f + reg_value(x)
    trace = SolverTrace()
    if not np.isfinite(obj):
        trace.status = "nonfinite_start"
        raise SolverAbort("objective is non-finite at the initializer", trace)

    tau = opts.step0 if opts.step0 is not None else _estimate_step(x, grad, smooth_grad)
    f_window = [f]
    obj_window = [obj]
    best_x, best_obj = x.copy(), obj

    for _ in range(opts.max_iters):
        ref_f = max(f_window)
        ref_obj = max(obj_window)
        accepted_first_try = True
        backtracks = 0
        while True:
            step_target = x - tau * grad
            if red_cfg is not None and red_cfg.lam > 0:
                x_new = red_prox(step_target, red_cfg.with_lam(tau * red_cfg.lam))
            else:
                x_new = step_target
            z_new = op.forward(x_new)
            f_new = loss_fn(y, z_new)
            obj_new = f_new + reg_value(x_new)
            dx = x_new - x
            dx_sq = float(np.sum(dx * dx))
            if monotone:
                ok = np.isfinite(obj_new) and (
                    obj_new <= ref_obj - opts.linesearch_c * dx_sq / tau
                )
            else:
                linear = float(np.sum(dx * grad))
                ok = np.isfinite(obj_new) and (
                    f_new <= ref_f + linear + dx_sq / (2.0 * tau)
                )
            if ok:
                break
            backtracks += 1
            accepted_first_try = False
            if backtracks > opts.max_backtracks:
                x_new = None
                break
            tau *= opts.shrink
        if x_new is None:
            trace.status = "linesearch_failed"
            break

        trace.append(obj_new, float(np.linalg.norm(y - np.abs(z_new))), tau,
                     accepted_first_try)

        grad_new = op.adjoint(loss_grad(z_new, y)).real
        if obj_new < best_obj:
            best_obj, best_x = obj_new, x_new.copy()

        rel_change = math.sqrt(dx_sq) / max(float(np.linalg.norm(x_new)), 1e-30)

        if opts.bb:
            # spectral proposal from the smooth term, capped so the accepted
            # step scale is not repeatedly overshot when the regularizer
            # curvature dominates the data term
            dg = (grad_new - grad).ravel()
            dxf = dx.ravel()
            dx_dg = float(np.dot(dxf, dg))
            dg_dg = float(np.dot(dg, dg))
            if dx_dg > 0 and dg_dg > 0:
                tau_s = dx_sq / dx_dg
                tau_m = dx_dg / dg_dg
                tau_bb = tau_m if 2.0 * tau_m > tau_s else tau_s - 0.5 * tau_m
                if np.isfinite(tau_bb) and tau_bb > 0:
                    tau = min(tau_bb, tau * opts.step_growth)

        x, z, grad, f, obj = x_new, z_new, grad_new, f_new, obj_new
        f_window.append(f)
        obj_window.append(obj)
        if len(f_window) > opts.window:
            f_window.pop(0)
            obj_window.pop(0)

        if rel_change < opts.tol:
            trace.status = "converged"
            break
    else:
        trace.status = "max_iters"

    return (best_x if monotone else x), trace


@dataclass
class HioOptions:
    """Hybrid input-output settings."""

    beta: float = 0.9
    iters: int = 1000
    nonneg: bool = True
    support_mask: np.ndarray = None  # frame-sized bool override; default from op

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError("beta must be in (0, 1]")


def _unit_phase(z):
    mag = np.abs(z)
    return np.where(mag > 0, np.divide(z, mag, out=np.ones_like(z), where=mag > 0), 1.0)


def hio_run(data, op, opts=None, x0=None):
    """Fienup's hybrid input-output iteration.

    For the oversampled Fourier operator the state is the full frame and the
    known support drives the feedback; for the CDP stack the support is the
    whole image and the modulus substitution runs per mask. Feedback keeps
    pixels that violate the constraints moving: ``g <- g - beta * g'`` there,
    ``g <- g'`` where the candidate already satisfies them.
    """
    opts = opts or HioOptions()
    y = data.y

    if op.kind == "fourier_os":
        frame = op.frame
        support = opts.support_mask if opts.support_mask is not None else op.support_mask()
        if x0 is None:
            x0 = np.ones(op.shape)
        g = embed(x0, frame, op.offset).real
        y2 = y.reshape(frame)
        for _ in range(opts.iters):
            spectrum = np.fft.fft2(g, norm="ortho")
            candidate = np.fft.ifft2(y2 * _unit_phase(spectrum), norm="ortho").real
            good = support & (candidate >= 0) if opts.nonneg else support
            g = np.where(good, candidate, g - opts.beta * candidate)
        return crop(g, op.shape, op.offset).real

    # CDP (or any tight-frame operator on the full image)
    if x0 is None:
        x0 = np.ones(op.shape)
    x = np.asarray(x0, dtype=np.float64).copy()
    scale = op.gram_scale
    for _ in range(opts.iters):
        z = op.forward(x)
        candidate = op.adjoint(y * _unit_phase(z)).real / scale
        good = candidate >= 0 if opts.nonneg else np.ones_like(candidate, dtype=bool)
        x = np.where(good, candidate, x - opts.beta * candidate)
    return x


def waf_run(data, op, iters=2000, step=None, x0=None):
    """Amplitude-flow baseline: fixed-step gradient descent on the amplitude loss."""
    if x0 is None:
        x0 = np.ones(op.shape)
    x = np.asarray(x0, dtype=np.float64).copy()
    if step is None:
        step = 0.9 / op.gram_scale
    y = data.y
    for _ in range(iters):
        z = op.forward(x)
        x = x - step * op.adjoint(amp_loss_subgrad(z, y)).real
    return x


DEFAULT_LAM_COEFF = {"cdp": 0.1, "fourier_os": 1.0}


def prdeep_run(data, op, bank, opts=None, x0=None, lam=None, lam_coeff=None,
               clamp_stages=False):
    """Run one solver stage per (denoiser, sigma) pair, warm-starting each.

    The regularization weight defaults to ``coeff * sigma_w_bar`` with the
    measurement-dependent coefficient (0.1 for the CDP stack, 1.0 for
    Fourier); pass ``lam`` to override it outright.
    """
    if len(bank) == 0:
        raise ValueError("denoiser bank must be non-empty")
    opts = opts or FastaOptions()
    if lam is None:
        if lam_coeff is None:
            lam_coeff = DEFAULT_LAM_COEFF.get(op.kind, 1.0)
        lam = lam_coeff * data.sigma_w_bar
    if x0 is None:
        x0 = np.ones(op.shape)
    x = np.asarray(x0, dtype=np.float64).copy()
    traces = []
    for denoiser, sigma in bank:
        cfg = RedConfig(lam, denoiser, sigma)
        x, trace = fasta_solve(op, data, cfg, x, opts)
        if clamp_stages:
            x = np.clip(x, 0.0, 255.0)
        traces.append(trace)
    return x, traces
