"""Experiment orchestration: initialization, scoring, and benchmark grids.

A benchmark cell is one (image, alpha, algorithm) triple: simulate noisy
magnitudes with a per-cell seed, initialize (ones for the CDP stack, the
screened random-restart protocol for Fourier), run the algorithm, and score
with the ambiguity-aware PSNR. Rows are collected in grid order and written
once, so re-running a config reproduces the CSV bit-for-bit apart from the
runtime column.
"""

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .denoise import DEFAULT_SIGMAS, DenoiserBank, make_denoiser
from .images import load_image, save_pgm
from .measurement import operator_from_config
from .noise import sample_shot_noise
from .red import RedConfig
from .solve import FastaOptions, HioOptions, fasta_solve, hio_run, prdeep_run, waf_run

__all__ = [
    "ExperimentConfig",
    "MetricsRow",
    "align_and_psnr",
    "fourier_init",
    "pick_best",
    "psnr",
    "run_experiment",
    "write_metrics_csv",
]


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


def psnr(xhat, xref):
    """``10 log10(255^2 / MSE)`` in dB; +inf when the images match exactly."""
    xhat = np.asarray(xhat, dtype=np.float64)
    xref = np.asarray(xref, dtype=np.float64)
    if xhat.shape != xref.shape:
        raise ValueError(f"shape mismatch: {xhat.shape} vs {xref.shape}")
    mse = float(np.mean((xhat - xref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def _conj_flip(x):
    """The cyclic 180-degree rotation p -> -p mod N that preserves DFT moduli."""
    return np.roll(x[::-1, ::-1], (1, 1), axis=(0, 1))


def align_and_psnr(xhat, xref, ambiguity="none"):
    """Score a reconstruction, optionally modulo the Fourier ambiguity group.

    With ``ambiguity="fourier"`` the candidate is searched over global sign,
    cyclic translations, and the 180-degree flip, maximizing FFT cross-
    correlation with the reference (equivalent to minimizing MSE, since every
    group element preserves the norm). Returns ``(psnr_db, aligned_image)``.
    """
    xhat = np.asarray(xhat, dtype=np.float64)
    xref = np.asarray(xref, dtype=np.float64)
    if xhat.shape != xref.shape:
        raise ValueError(f"shape mismatch: {xhat.shape} vs {xref.shape}")
    if ambiguity == "none":
        return psnr(xhat, xref), xhat
    if ambiguity != "fourier":
        raise ValueError(f"unknown ambiguity {ambiguity!r}")

    fref = np.fft.fft2(xref)
    best = None
    for base in (xhat, _conj_flip(xhat)):
        for sign in (1.0, -1.0):
            cand = sign * base
            corr = np.fft.ifft2(np.conj(np.fft.fft2(cand)) * fref).real
            idx = np.unravel_index(np.argmax(corr), corr.shape)
            score = corr[idx]
            if best is None or score > best[0]:
                best = (score, cand, idx)
    _, cand, (dy, dx) = best
    aligned = np.roll(cand, (dy, dx), axis=(0, 1))
    return psnr(aligned, xref), aligned


# ---------------------------------------------------------------------------
# Fourier initialization protocol
# ---------------------------------------------------------------------------


def pick_best(residuals):
    """Index of the smallest residual; ties go to the lowest index."""
    if len(residuals) == 0:
        raise ValueError("no candidates to select from")
    return int(np.argmin(residuals))


def fourier_init(data, op, inits=50, screen_iters=50, polish_iters=1000, seed=0,
                 beta=0.9, nonneg=True, return_info=False):
    """Screened random-restart initialization for Fourier magnitudes.

    Runs ``inits`` short alternating-projection bursts from random nonnegative
    starts, keeps the candidate with the lowest data residual, then polishes
    it with a long run. Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    screen_opts = HioOptions(beta=beta, iters=screen_iters, nonneg=nonneg)
    candidates = []
    residuals = []
    for _ in range(inits):
        x0 = 255.0 * rng.random(op.shape)
        xi = hio_run(data, op, screen_opts, x0)
        candidates.append(xi)
        residuals.append(float(np.linalg.norm(data.y - op.amplitude(xi))))
    chosen = pick_best(residuals)
    polish_opts = HioOptions(beta=beta, iters=polish_iters, nonneg=nonneg)
    x = hio_run(data, op, polish_opts, candidates[chosen])
    if return_info:
        return x, {"screen_residuals": residuals, "selected": chosen}
    return x


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """One benchmark grid: operator x images x alphas x algorithms."""

    operator: dict
    images: list
    alphas: list
    algorithms: list
    seed: int
    sigmas: list = field(default_factory=lambda: list(DEFAULT_SIGMAS))
    stage_iters: int = 200
    lam_coeff: dict = field(default_factory=lambda: {"cdp": 0.1, "fourier_os": 1.0})
    restarts: int = 3
    init: dict = field(
        default_factory=lambda: {"inits": 50, "screen_iters": 50, "polish_iters": 1000}
    )
    workers: int = 1
    clamp_stages: bool = False

    @classmethod
    def defaults(cls):
        return cls(
            operator={"type": "cdp", "shape": [64, 64], "K": 4, "seed": 1},
            images=["images/blobs.pgm"],
            alphas=[9.0],
            algorithms=[
                {"method": "hio", "iters": 1000},
                {"method": "prdeep", "denoiser": "tv"},
            ],
            seed=1,
        )

    @classmethod
    def from_json(cls, path, check_files=True):
        with open(path) as fh:
            raw = json.load(fh)
        if "seed" not in raw:
            raise ValueError("config must set an explicit top-level seed")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        if check_files:
            base = Path(path).parent
            resolved = []
            for img in cfg.images:
                p = Path(img)
                if not p.is_absolute():
                    p = base / p
                if not p.exists():
                    raise FileNotFoundError(f"referenced image does not exist: {p}")
                resolved.append(str(p))
            cfg.images = resolved
        return cfg

    def to_json(self, path=None):
        text = json.dumps(asdict(self), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


@dataclass
class MetricsRow:
    image: str
    algorithm: str
    alpha: float
    psnr: float  # dB; +inf for exact recovery; nan when the cell failed
    runtime_s: float
    residual: float
    seed: int
    error: str = ""


CSV_COLUMNS = ["image", "algorithm", "alpha", "psnr", "runtime_s", "residual", "seed", "error"]


def _fmt(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def write_metrics_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, col)) for col in CSV_COLUMNS])


# ---------------------------------------------------------------------------
# Benchmark execution
# ---------------------------------------------------------------------------


def _cell_seed(base, *indices):
    """Stable per-cell seed stream derived from the config seed."""
    return np.random.SeedSequence([int(base), *[int(i) for i in indices]])


def _make_solver_opts(algo, default_iters):
    return FastaOptions(
        max_iters=int(algo.get("iters", default_iters)),
        window=int(algo.get("window", 10)),
        tol=float(algo.get("tol", 1e-6)),
    )


def _run_algorithm(algo, data, op, x0, config):
    """Dispatch one algorithm spec; returns (xhat, traces)."""
    method = algo["method"]
    if method == "hio":
        opts = HioOptions(
            beta=float(algo.get("beta", 0.9)),
            iters=int(algo.get("iters", 1000)),
            nonneg=bool(algo.get("nonneg", True)),
        )
        return hio_run(data, op, opts, x0), []
    if method == "wf":
        return waf_run(data, op, iters=int(algo.get("iters", 2000)),
                       step=algo.get("step"), x0=x0), []
    if method == "fasta":
        lam = float(algo.get("lam", 0.0))
        red_cfg = None
        if lam > 0:
            denoiser = make_denoiser(algo.get("denoiser", "tv"),
                                     **algo.get("denoiser_params", {}))
            red_cfg = RedConfig(lam, denoiser, float(algo.get("sigma", 20.0)))
        xhat, trace = fasta_solve(op, data, red_cfg, x0, _make_solver_opts(algo, 800))
        return xhat, [trace]
    if method == "prdeep":
        denoiser = make_denoiser(algo.get("denoiser", "tv"),
                                 **algo.get("denoiser_params", {}))
        sigmas = algo.get("sigmas", config.sigmas)
        bank = DenoiserBank.uniform(denoiser, sigmas)
        coeff = algo.get("lam_coeff", config.lam_coeff.get(op.kind))
        xhat, traces = prdeep_run(
            data, op, bank,
            opts=_make_solver_opts(algo, config.stage_iters),
            x0=x0,
            lam=algo.get("lam"),
            lam_coeff=coeff,
            clamp_stages=config.clamp_stages,
        )
        return xhat, traces
    raise ValueError(f"unknown algorithm method {method!r}")


def _algo_label(algo):
    if "name" in algo:
        return algo["name"]
    if algo["method"] == "prdeep":
        return f"prdeep-{algo.get('denoiser', 'tv')}"
    return algo["method"]


def simulate_cell(config, op, x_true, alpha, img_idx, alpha_idx):
    """Noisy data for one (image, alpha) pair; shared across algorithms."""
    z = op.forward(x_true)
    seed = _cell_seed(config.seed, 101, img_idx, alpha_idx)
    return sample_shot_noise(z, alpha, seed)


def _run_cell(config, op, image_path, x_true, alpha, algo, indices, out_dir):
    img_idx, alpha_idx, algo_idx = indices
    label = _algo_label(algo)
    stem = Path(image_path).stem
    seed_tag = int(
        _cell_seed(config.seed, 101, img_idx, alpha_idx).generate_state(1)[0] % 2**31
    )
    started = time.perf_counter()
    try:
        data = simulate_cell(config, op, x_true, alpha, img_idx, alpha_idx)
        if op.kind == "fourier_os":
            best = None
            for r in range(max(1, config.restarts)):
                init_seed = _cell_seed(config.seed, 202, img_idx, alpha_idx, algo_idx, r)
                x0 = fourier_init(
                    data, op,
                    inits=int(config.init.get("inits", 50)),
                    screen_iters=int(config.init.get("screen_iters", 50)),
                    polish_iters=int(config.init.get("polish_iters", 1000)),
                    seed=init_seed,
                )
                xhat_r, traces_r = _run_algorithm(algo, data, op, x0, config)
                res_r = float(np.linalg.norm(data.y - op.amplitude(xhat_r)))
                if best is None or res_r < best[0]:
                    best = (res_r, xhat_r, traces_r)
            residual, xhat, traces = best
            score, aligned = align_and_psnr(xhat, x_true, ambiguity="fourier")
        else:
            x0 = np.ones(op.shape)
            xhat, traces = _run_algorithm(algo, data, op, x0, config)
            residual = float(np.linalg.norm(data.y - op.amplitude(xhat)))
            score, aligned = align_and_psnr(xhat, x_true, ambiguity="none")
        runtime = time.perf_counter() - started
        if out_dir is not None:
            cell_name = f"{stem}__alpha{alpha:g}__{label}"
            save_pgm(out_dir / f"{cell_name}.pgm", aligned)
            for t_idx, trace in enumerate(traces):
                trace.to_csv(out_dir / f"{cell_name}__trace{t_idx}.csv")
        return MetricsRow(stem, label, float(alpha), score, runtime, residual, seed_tag)
    except Exception as exc:  # per-cell isolation: the grid keeps going
        runtime = time.perf_counter() - started
        return MetricsRow(
            stem, label, float(alpha), float("nan"), runtime, float("nan"),
            seed_tag, error=f"{type(exc).__name__}: {exc}",
        )


def run_experiment(config, out_dir=None):
    """Run the full grid; returns rows in deterministic grid order.

    Artifacts (reconstruction PGMs, solver traces, metrics CSV) are written
    under ``out_dir`` when given. Cells execute in a bounded thread pool; the
    CSV is written once, in grid order, by the caller thread.
    """
    op = operator_from_config(config.operator)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    truths = [(path, load_image(path)) for path in config.images]
    for path, img in truths:
        if img.shape != op.shape:
            raise ValueError(
                f"{path}: image shape {img.shape} does not match operator shape {op.shape}"
            )

    cells = []
    for i, (path, x_true) in enumerate(truths):
        for j, alpha in enumerate(config.alphas):
            for k, algo in enumerate(config.algorithms):
                cells.append((path, x_true, alpha, algo, (i, j, k)))

    def work(cell):
        path, x_true, alpha, algo, indices = cell
        return _run_cell(config, op, path, x_true, alpha, algo, indices, out_dir)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(work, cells))
    else:
        rows = [work(cell) for cell in cells]

    if out_dir is not None:
        write_metrics_csv(rows, out_dir / "results.csv")
    return rows
