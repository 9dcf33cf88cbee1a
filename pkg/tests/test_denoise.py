import numpy as np
import pytest

from phaseret.denoise import (
    DenoiserBank,
    gaussian_blur,
    identity,
    make_denoiser,
    median_denoise,
    nlm_denoise,
    tv_denoise,
)

ALL_BUILTINS = [identity, median_denoise, gaussian_blur, tv_denoise, nlm_denoise]


def reference_tv_denoise(x, gamma, iters=50000, tol=1e-10):
    """Loop-based dual-projection iteration, run to high accuracy."""
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape
    tau = 0.25

    def grad(u):
        g = np.zeros((2, h, w))
        for i in range(h):
            for j in range(w):
                if i + 1 < h:
                    g[0, i, j] = u[i + 1, j] - u[i, j]
                if j + 1 < w:
                    g[1, i, j] = u[i, j + 1] - u[i, j]
        return g

    def div(p):
        out = np.zeros((h, w))
        for i in range(h):
            for j in range(w):
                a = p[0, i, j] if i + 1 < h else 0.0
                b = p[0, i - 1, j] if i > 0 else 0.0
                c = p[1, i, j] if j + 1 < w else 0.0
                d = p[1, i, j - 1] if j > 0 else 0.0
                out[i, j] = a - b + c - d
        return out

    p = np.zeros((2, h, w))
    for _ in range(iters):
        g = grad(div(p) - x / gamma)
        mag = np.sqrt(g[0] ** 2 + g[1] ** 2)
        p_new = (p + tau * g) / (1.0 + tau * mag)
        delta = np.max(np.abs(p_new - p))
        p = p_new
        if delta < tol:
            break
    return x - gamma * div(p)


@pytest.fixture
def random_image():
    rng = np.random.default_rng(21)
    return 255.0 * rng.random((16, 16))


def test_identity_bit_exact(random_image):
    out = identity(random_image, 40.0)
    assert np.array_equal(out, random_image)


@pytest.mark.parametrize("den", ALL_BUILTINS)
def test_constant_images_are_fixed_points(den):
    c = np.full((12, 12), 117.0)
    out = den(c, 20.0)
    assert out.shape == c.shape
    assert np.allclose(out, c, atol=1e-9)


@pytest.mark.parametrize("den", ALL_BUILTINS)
def test_dimensions_and_range_preserved(den, random_image):
    sigma = 25.0
    out = den(random_image, sigma)
    assert out.shape == random_image.shape
    assert np.all(np.isfinite(out))
    assert out.min() >= -3 * sigma and out.max() <= 255.0 + 3 * sigma


def test_gaussian_blur_linear_and_self_adjoint():
    rng = np.random.default_rng(22)
    x = rng.standard_normal((16, 16))
    y = rng.standard_normal((16, 16))
    a, b = 1.3, -0.6
    sigma = 30.0
    lhs = gaussian_blur(a * x + b * y, sigma)
    rhs = a * gaussian_blur(x, sigma) + b * gaussian_blur(y, sigma)
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, np.max(np.abs(lhs)))
    ip1 = np.sum(gaussian_blur(x, sigma) * y)
    ip2 = np.sum(x * gaussian_blur(y, sigma))
    assert abs(ip1 - ip2) < 1e-12 * max(1.0, abs(ip1))


def step_image(size=32, noise_sigma=20.0, seed=30):
    clean = np.zeros((size, size))
    clean[:, size // 2 :] = 200.0
    clean += 20.0
    rng = np.random.default_rng(seed)
    noisy = clean + noise_sigma * rng.standard_normal(clean.shape)
    return clean, noisy


def test_tv_improves_noisy_step_edge():
    clean, noisy = step_image(noise_sigma=20.0)
    out = tv_denoise(noisy, 20.0)
    mse_in = np.mean((noisy - clean) ** 2)
    mse_out = np.mean((out - clean) ** 2)
    assert mse_out < mse_in


def test_tv_sigma_zero_is_identity(random_image):
    out = tv_denoise(random_image, 0.0)
    assert np.max(np.abs(out - random_image)) < 1e-12


def test_tv_matches_high_accuracy_reference_oracle():
    rng = np.random.default_rng(31)
    x = 255.0 * rng.random((8, 8))
    sigma = 15.0
    got = tv_denoise(x, sigma, max_iter=50000, tol=1e-12)
    ref = reference_tv_denoise(x, 0.9 * sigma)
    assert np.max(np.abs(got - ref)) < 1e-6


def test_make_denoiser_registry():
    d = make_denoiser("tv")
    assert d.name == "tv"
    bound = make_denoiser("gaussian_blur", spatial_sigma=2.0)
    x = np.ones((8, 8))
    assert np.allclose(bound(x, 10.0), x)
    with pytest.raises(ValueError, match="unknown denoiser"):
        make_denoiser("bm3d")


def test_denoiser_bank_validation():
    bank = DenoiserBank.uniform(tv_denoise)
    assert [s for _, s in bank] == [60.0, 40.0, 20.0, 10.0]
    with pytest.raises(ValueError, match="strictly decreasing"):
        DenoiserBank(((tv_denoise, 40.0), (tv_denoise, 40.0)))
    with pytest.raises(ValueError, match="non-empty"):
        DenoiserBank(())


def test_median_and_nlm_deterministic(random_image):
    assert np.array_equal(median_denoise(random_image, 10.0),
                          median_denoise(random_image, 10.0))
    assert np.array_equal(nlm_denoise(random_image, 10.0),
                          nlm_denoise(random_image, 10.0))
