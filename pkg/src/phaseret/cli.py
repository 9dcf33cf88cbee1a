"""Command-line interface.

Subcommands:
  simulate      write noisy measurement files for a config grid
  recover       reconstruct from simulated measurement files with one algorithm
  bench         run the full grid and write a metrics CSV
  denoise-test  apply one denoiser to an image file
  make-images   materialize the bundled synthetic test images as PGMs
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .denoise import make_denoiser
from .images import SYNTHETIC_KINDS, load_image, save_pgm, synthetic_image
from .measurement import operator_from_config
from .noise import PhaselessData
from .pipeline import (
    ExperimentConfig,
    MetricsRow,
    _algo_label,
    _cell_seed,
    _run_algorithm,
    align_and_psnr,
    fourier_init,
    run_experiment,
    simulate_cell,
    write_metrics_csv,
)


def _data_filename(image_path, alpha):
    return f"{Path(image_path).stem}__alpha{alpha:g}.pryd"


def cmd_simulate(args):
    config = ExperimentConfig.from_json(args.config)
    op = operator_from_config(config.operator)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, image_path in enumerate(config.images):
        x_true = load_image(image_path)
        for j, alpha in enumerate(config.alphas):
            data = simulate_cell(config, op, x_true, alpha, i, j)
            data.save(out / _data_filename(image_path, alpha))
    print(f"wrote {len(config.images) * len(config.alphas)} measurement files to {out}")
    return 0


def cmd_recover(args):
    config = ExperimentConfig.from_json(args.config)
    op = operator_from_config(config.operator)
    algos = {_algo_label(a): a for a in config.algorithms}
    if args.algo not in algos:
        print(f"error: algorithm {args.algo!r} not in config (have {sorted(algos)})",
              file=sys.stderr)
        return 2
    algo = algos[args.algo]
    algo_idx = list(algos).index(args.algo)
    in_dir, out = Path(getattr(args, "in")), Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for i, image_path in enumerate(config.images):
        x_true = load_image(image_path)
        for j, alpha in enumerate(config.alphas):
            data = PhaselessData.load(in_dir / _data_filename(image_path, alpha))
            import time

            started = time.perf_counter()
            if op.kind == "fourier_os":
                init_seed = _cell_seed(config.seed, 202, i, j, algo_idx, 0)
                x0 = fourier_init(
                    data, op,
                    inits=int(config.init.get("inits", 50)),
                    screen_iters=int(config.init.get("screen_iters", 50)),
                    polish_iters=int(config.init.get("polish_iters", 1000)),
                    seed=init_seed,
                )
                ambiguity = "fourier"
            else:
                x0 = np.ones(op.shape)
                ambiguity = "none"
            xhat, traces = _run_algorithm(algo, data, op, x0, config)
            runtime = time.perf_counter() - started
            score, aligned = align_and_psnr(xhat, x_true, ambiguity=ambiguity)
            residual = float(np.linalg.norm(data.y - op.amplitude(xhat)))
            stem = Path(image_path).stem
            cell = f"{stem}__alpha{alpha:g}__{args.algo}"
            save_pgm(out / f"{cell}.pgm", aligned)
            for t_idx, trace in enumerate(traces):
                trace.to_csv(out / f"{cell}__trace{t_idx}.csv")
            rows.append(MetricsRow(stem, args.algo, float(alpha), score, runtime,
                                   residual, config.seed))
            print(f"{cell}: psnr={score:.2f} dB residual={residual:.4g}")
    write_metrics_csv(rows, out / "recover_metrics.csv")
    return 0


def cmd_bench(args):
    config = ExperimentConfig.from_json(args.config)
    out_csv = Path(args.out)
    artifacts = out_csv.parent if out_csv.parent != Path("") else Path(".")
    rows = run_experiment(config, out_dir=artifacts)
    write_metrics_csv(rows, out_csv)
    failures = [r for r in rows if r.error]
    print(f"wrote {len(rows)} rows to {out_csv} ({len(failures)} failed cells)")
    return 0


def cmd_denoise_test(args):
    denoiser = make_denoiser(args.denoiser)
    img = load_image(getattr(args, "in"))
    out = denoiser(img, args.sigma)
    save_pgm(args.out, out)
    print(f"denoised {getattr(args, 'in')} with {args.denoiser} (sigma={args.sigma:g}) -> {args.out}")
    return 0


def cmd_make_images(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, kind in enumerate(SYNTHETIC_KINDS):
        img = synthetic_image(kind, size=args.size, seed=args.seed + 17 * i)
        save_pgm(out / f"{kind}.pgm", img)
    print(f"wrote {len(SYNTHETIC_KINDS)} synthetic images ({args.size}x{args.size}) to {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="phaseret",
        description="Phase retrieval from coded-diffraction and Fourier magnitudes.",
    )
    parser.add_argument("--dump-defaults", action="store_true",
                        help="print the default experiment config as JSON and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("simulate", help="write noisy measurement files")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recover", help="reconstruct from measurement files")
    p.add_argument("--config", required=True)
    p.add_argument("--algo", required=True)
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("bench", help="run the full benchmark grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("denoise-test", help="apply one denoiser to an image")
    p.add_argument("--denoiser", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_denoise_test)

    p = sub.add_parser("make-images", help="write the synthetic test images")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_images)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.dump_defaults:
        print(ExperimentConfig.defaults().to_json())
        return 0
    if not getattr(args, "command", None):
        parser.print_help()
        return 1
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
