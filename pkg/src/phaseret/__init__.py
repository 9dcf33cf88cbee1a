"""Phase retrieval from coded-diffraction and oversampled Fourier magnitudes.

Recovers real images from noisy amplitude measurements ``y = |Ax| + w`` by
minimizing an amplitude data-fidelity term plus a denoiser-residual
regularizer, with classical alternating-projection baselines and a
reproducible benchmark pipeline.
"""

from .denoise import (
    DenoiserBank,
    ExternalDenoiser,
    gaussian_blur,
    identity,
    make_denoiser,
    median_denoise,
    nlm_denoise,
    tv_denoise,
)
from .field import crop, embed, fft2, ifft2
from .images import load_image, save_pgm, synthetic_image, synthetic_suite
from .measurement import CdpOperator, FourierOsOperator, cdp_new, operator_from_config
from .noise import PhaselessData, noise_std_estimate, sample_shot_noise
from .pipeline import (
    ExperimentConfig,
    align_and_psnr,
    fourier_init,
    psnr,
    run_experiment,
)
from .red import RedConfig, red_grad, red_prox, red_value
from .solve import (
    FastaOptions,
    HioOptions,
    SolverTrace,
    amp_loss,
    amp_loss_subgrad,
    fasta_solve,
    hio_run,
    intensity_loss,
    intensity_loss_grad,
    prdeep_run,
    waf_run,
)

__version__ = "0.1.0"
