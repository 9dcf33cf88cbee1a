import numpy as np
import pytest
from PIL import Image

from phaseret.images import (
    SYNTHETIC_KINDS,
    load_image,
    save_pgm,
    synthetic_image,
    synthetic_suite,
)


def test_pgm_format_definition(tmp_path):
    path = tmp_path / "tiny.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 17, 34]))
    img = load_image(path)
    assert np.array_equal(img, [[0.0, 255.0], [17.0, 34.0]])


def test_pgm_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(80)
    img = rng.integers(0, 256, size=(12, 9)).astype(np.float64)
    path = tmp_path / "rt.pgm"
    save_pgm(path, img)
    assert np.array_equal(load_image(path), img)


def test_pgm_with_comments_and_bad_inputs(tmp_path):
    path = tmp_path / "comment.pgm"
    path.write_bytes(b"P5\n# a comment\n2 1 # trailing\n255\n" + bytes([7, 9]))
    assert np.array_equal(load_image(path), [[7.0, 9.0]])
    bad = tmp_path / "p2.pgm"
    bad.write_bytes(b"P2\n2 2\n255\n0 1 2 3\n")
    with pytest.raises(ValueError, match="P5"):
        load_image(bad)
    deep = tmp_path / "deep.pgm"
    deep.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
    with pytest.raises(ValueError, match="8-bit"):
        load_image(deep)
    short = tmp_path / "short.pgm"
    short.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    with pytest.raises(ValueError, match="truncated"):
        load_image(short)


def test_png_grayscale_load(tmp_path):
    rng = np.random.default_rng(81)
    arr = rng.integers(0, 256, size=(10, 14), dtype=np.uint8)
    path = tmp_path / "g.png"
    Image.fromarray(arr, mode="L").save(path)
    assert np.array_equal(load_image(path), arr.astype(np.float64))


def test_png_16bit_rejected(tmp_path):
    arr = (np.arange(16, dtype=np.uint16) * 1000).reshape(4, 4)
    path = tmp_path / "deep.png"
    Image.fromarray(arr).save(path)
    with pytest.raises(ValueError, match="16-bit"):
        load_image(path)


def test_png_color_rejected(tmp_path):
    arr = np.zeros((4, 4, 3), dtype=np.uint8)
    path = tmp_path / "rgb.png"
    Image.fromarray(arr, mode="RGB").save(path)
    with pytest.raises(ValueError, match="mode"):
        load_image(path)


def test_synthetic_images_deterministic_and_in_range():
    for kind in SYNTHETIC_KINDS:
        a = synthetic_image(kind, size=32, seed=4)
        b = synthetic_image(kind, size=32, seed=4)
        assert np.array_equal(a, b)
        assert a.shape == (32, 32)
        assert a.min() >= 0.0 and a.max() <= 255.0
        assert a.max() > 100.0  # stand-ins use most of the dynamic range
    suite = synthetic_suite(size=16)
    assert list(suite) == list(SYNTHETIC_KINDS)
    with pytest.raises(ValueError, match="unknown synthetic"):
        synthetic_image("camera")
