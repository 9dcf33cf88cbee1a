"""Pluggable denoisers D(x, sigma) on the [0,255] pixel scale.

A denoiser is any callable ``d(x, sigma) -> ndarray`` mapping a 2D float64
image to an image of the same shape; ``sigma`` is the assumed noise standard
deviation in [0,255] units. Built-in denoisers are deterministic and never
clip their output (downstream regularization needs unclipped values).

``gaussian_blur`` is exactly linear and self-adjoint (circular convolution
with a symmetric kernel) and serves as the exactness anchor for gradient
checks of the denoiser-based regularizer.

External denoisers run as child processes speaking the PRDN1 framing
protocol over stdin/stdout (little-endian):

* handshake: child writes ``b"PRDN"`` + u8 version (=1)
* request:   u32 height, u32 width, f32 sigma, h*w f32 pixels (row-major)
* response:  u8 status; 0 -> h*w f32 pixels, 1 -> u32 msg_len + UTF-8 message
* shutdown:  parent closes stdin, child exits 0
"""

import os
import select
import struct
import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.ndimage
from skimage.restoration import denoise_nl_means

__all__ = [
    "DenoiserBank",
    "ExternalDenoiser",
    "ExternalDenoiserError",
    "HandshakeError",
    "ProtocolError",
    "RequestFailed",
    "RequestTimeout",
    "gaussian_blur",
    "identity",
    "make_denoiser",
    "median_denoise",
    "nlm_denoise",
    "tv_denoise",
]

DEFAULT_SIGMAS = (60.0, 40.0, 20.0, 10.0)


def identity(x, sigma=0.0):
    """The do-nothing denoiser; useful as a degenerate regularizer."""
    return np.array(x, dtype=np.float64, copy=True)


identity.name = "identity"


def gaussian_blur(x, sigma, spatial_sigma=None):
    """Circular convolution with a normalized symmetric Gaussian kernel.

    The spatial width grows mildly with the noise level unless given
    explicitly. Exactly linear, self-adjoint, and DC-preserving.
    """
    x = np.asarray(x, dtype=np.float64)
    if spatial_sigma is None:
        spatial_sigma = max(0.5, sigma / 20.0)
    h, w = x.shape
    di = np.minimum(np.arange(h), h - np.arange(h))[:, None]
    dj = np.minimum(np.arange(w), w - np.arange(w))[None, :]
    kernel = np.exp(-(di**2 + dj**2) / (2.0 * spatial_sigma**2))
    kernel /= kernel.sum()
    out = np.fft.ifft2(np.fft.fft2(x) * np.fft.fft2(kernel)).real
    return out


gaussian_blur.name = "gaussian_blur"


def median_denoise(x, sigma=0.0, size=3):
    """3x3 median filter (sigma sets no parameter; kept for the common API)."""
    x = np.asarray(x, dtype=np.float64)
    return scipy.ndimage.median_filter(x, size=size, mode="reflect")


median_denoise.name = "median"


def _tv_grad(u):
    g = np.zeros((2, *u.shape), dtype=np.float64)
    g[0, :-1, :] = u[1:, :] - u[:-1, :]
    g[1, :, :-1] = u[:, 1:] - u[:, :-1]
    return g


def _tv_div(p):
    out = np.zeros(p.shape[1:], dtype=np.float64)
    out[:-1, :] += p[0, :-1, :]
    out[1:, :] -= p[0, :-1, :]
    out[:, :-1] += p[1, :, :-1]
    out[:, 1:] -= p[1, :, :-1]
    return out


def tv_denoise(x, sigma, weight_scale=0.9, max_iter=60, tol=1e-5):
    """Rudin-Osher-Fatemi proximal problem via Chambolle's dual projection.

    Solves ``min_u 0.5||u - x||^2 + gamma TV(u)`` with ``gamma =
    weight_scale * sigma``; the 0.9 scale was desk-calibrated on a noisy
    step edge. Iterations stop at ``max_iter`` or when the dual variable
    moves less than ``tol`` in max norm.
    """
    x = np.asarray(x, dtype=np.float64)
    gamma = weight_scale * sigma
    if gamma <= 0:
        return x.copy()
    tau = 0.25
    p = np.zeros((2, *x.shape), dtype=np.float64)
    scaled = x / gamma
    for _ in range(max_iter):
        g = _tv_grad(_tv_div(p) - scaled)
        mag = np.sqrt(g[0] ** 2 + g[1] ** 2)
        p_new = (p + tau * g) / (1.0 + tau * mag)
        delta = np.max(np.abs(p_new - p))
        p = p_new
        if delta < tol:
            break
    return x - gamma * _tv_div(p)


tv_denoise.name = "tv"


def nlm_denoise(x, sigma, patch_size=7, patch_distance=10, h_scale=0.4):
    """Non-local means with a 7x7 patch and 21x21 search window, h = 0.4 sigma."""
    x = np.asarray(x, dtype=np.float64)
    return denoise_nl_means(
        x,
        patch_size=patch_size,
        patch_distance=patch_distance,
        h=h_scale * sigma,
        sigma=sigma,
        fast_mode=True,
        preserve_range=True,
    ).astype(np.float64)


nlm_denoise.name = "nlm"


_BUILTINS = {
    "identity": identity,
    "median": median_denoise,
    "gaussian_blur": gaussian_blur,
    "tv": tv_denoise,
    "nlm": nlm_denoise,
}


def make_denoiser(name, **params):
    """Look up a builtin denoiser, optionally binding extra parameters.

    ``name`` may also be ``"external:<command line>"`` to spawn a PRDN1
    subprocess denoiser.
    """
    if name.startswith("external:"):
        import shlex

        return ExternalDenoiser(shlex.split(name[len("external:") :]), **params)
    try:
        fn = _BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown denoiser {name!r}; have {sorted(_BUILTINS)}") from None
    if not params:
        return fn

    def bound(x, sigma):
        return fn(x, sigma, **params)

    bound.name = name
    return bound


@dataclass(frozen=True)
class DenoiserBank:
    """Ordered (denoiser, sigma) stages with strictly decreasing sigmas."""

    stages: tuple

    def __post_init__(self):
        stages = tuple((d, float(s)) for d, s in self.stages)
        if not stages:
            raise ValueError("denoiser bank must be non-empty")
        sigmas = [s for _, s in stages]
        if any(b >= a for a, b in zip(sigmas, sigmas[1:])):
            raise ValueError(f"sigmas must be strictly decreasing, got {sigmas}")
        object.__setattr__(self, "stages", stages)

    @classmethod
    def uniform(cls, denoiser, sigmas=DEFAULT_SIGMAS):
        """One denoiser applied at each sigma of the schedule."""
        return cls(tuple((denoiser, s) for s in sigmas))

    def __len__(self):
        return len(self.stages)

    def __iter__(self):
        return iter(self.stages)


# ---------------------------------------------------------------------------
# PRDN1 subprocess bridge
# ---------------------------------------------------------------------------

PROTOCOL_MAGIC = b"PRDN"
PROTOCOL_VERSION = 1


class ExternalDenoiserError(RuntimeError):
    """Base error for the subprocess denoiser bridge."""


class HandshakeError(ExternalDenoiserError):
    pass


class ProtocolError(ExternalDenoiserError):
    pass


class RequestTimeout(ExternalDenoiserError):
    pass


class RequestFailed(ExternalDenoiserError):
    """The plugin answered a request with an error frame."""


class _StderrDrain(threading.Thread):
    """Collect the tail of the child's stderr without blocking it."""

    def __init__(self, stream, max_lines=50):
        super().__init__(daemon=True)
        self.stream = stream
        self.lines = deque(maxlen=max_lines)
        self.start()

    def run(self):
        try:
            for line in self.stream:
                self.lines.append(line.decode("utf-8", "replace").rstrip())
        except ValueError:
            pass

    def tail(self):
        return "\n".join(self.lines)


class ExternalDenoiser:
    """Client for one PRDN1 denoiser process; one request in flight at a time."""

    def __init__(self, cmd, timeout=30.0, cwd=None):
        self.cmd = list(cmd)
        self.timeout = float(timeout)
        self.name = "external"
        self._lock = threading.Lock()
        self._proc = subprocess.Popen(
            self.cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            cwd=cwd,
        )
        self._stderr = _StderrDrain(self._proc.stderr)
        os.set_blocking(self._proc.stdout.fileno(), False)
        try:
            header = self._read_exact(5, self.timeout)
        except ExternalDenoiserError as exc:
            self.close()
            raise HandshakeError(f"no handshake from {self.cmd}: {exc}") from None
        if header[:4] != PROTOCOL_MAGIC:
            self.close()
            raise HandshakeError(f"bad protocol magic {header[:4]!r}{self._diag()}")
        if header[4] != PROTOCOL_VERSION:
            self.close()
            raise HandshakeError(
                f"unsupported protocol version {header[4]}, expected {PROTOCOL_VERSION}"
            )

    def _diag(self):
        tail = self._stderr.tail()
        code = self._proc.poll()
        parts = []
        if code is not None:
            parts.append(f"process exited with code {code}")
        if tail:
            parts.append(f"stderr:\n{tail}")
        return ("\n" + "\n".join(parts)) if parts else ""

    def _read_exact(self, n, timeout):
        fd = self._proc.stdout.fileno()
        buf = bytearray()
        deadline = time.monotonic() + timeout
        while len(buf) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise RequestTimeout(
                    f"timed out after {timeout:.1f}s waiting for {n} bytes "
                    f"(got {len(buf)}){self._diag()}"
                )
            ready, _, _ = select.select([fd], [], [], min(remaining, 0.5))
            if not ready:
                continue
            chunk = os.read(fd, n - len(buf))
            if not chunk:
                raise ProtocolError(
                    f"stream closed mid-frame ({len(buf)}/{n} bytes){self._diag()}"
                )
            buf.extend(chunk)
        return bytes(buf)

    def __call__(self, x, sigma):
        x = np.asarray(x, dtype=np.float64)
        h, w = x.shape
        payload = x.astype("<f4").tobytes()
        header = struct.pack("<IIf", h, w, float(sigma))
        with self._lock:
            if self._proc.poll() is not None:
                raise ProtocolError(f"denoiser process is not running{self._diag()}")
            try:
                self._proc.stdin.write(header + payload)
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise ProtocolError(f"failed to send request: {exc}{self._diag()}") from None
            (status,) = self._read_exact(1, self.timeout)
            if status == 0:
                raw = self._read_exact(4 * h * w, self.timeout)
                out = np.frombuffer(raw, dtype="<f4").astype(np.float64)
                return out.reshape(h, w)
            if status == 1:
                (msg_len,) = struct.unpack("<I", self._read_exact(4, self.timeout))
                msg = self._read_exact(msg_len, self.timeout).decode("utf-8", "replace")
                raise RequestFailed(f"denoiser reported: {msg}")
            raise ProtocolError(f"invalid status byte {status}{self._diag()}")

    def close(self):
        if self._proc.stdin and not self._proc.stdin.closed:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
