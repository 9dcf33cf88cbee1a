import sys
from pathlib import Path

import numpy as np
import pytest

from phaseret.denoise import (
    ExternalDenoiser,
    HandshakeError,
    ProtocolError,
    RequestFailed,
    RequestTimeout,
)

PLUGINS = Path(__file__).parent / "plugins.py"


def plugin_cmd(mode):
    return [sys.executable, str(PLUGINS), mode]


def test_echo_round_trip_is_f32_exact():
    rng = np.random.default_rng(40)
    x = 255.0 * rng.random((32, 24))
    with ExternalDenoiser(plugin_cmd("echo")) as den:
        out = den(x, 25.0)
    assert np.array_equal(out, x.astype(np.float32).astype(np.float64))


def test_multiple_requests_one_process():
    with ExternalDenoiser(plugin_cmd("echo")) as den:
        for seed in range(3):
            x = np.random.default_rng(seed).random((8, 8))
            out = den(x, 10.0)
            assert np.array_equal(out, x.astype(np.float32).astype(np.float64))


def test_bad_version_rejected():
    with pytest.raises(HandshakeError, match="version"):
        ExternalDenoiser(plugin_cmd("badversion"))


def test_error_frame_surfaces_message():
    with ExternalDenoiser(plugin_cmd("error")) as den:
        with pytest.raises(RequestFailed, match="synthetic failure"):
            den(np.ones((4, 4)), 10.0)


def test_request_timeout():
    with ExternalDenoiser(plugin_cmd("slow"), timeout=0.5) as den:
        with pytest.raises(RequestTimeout, match="timed out"):
            den(np.ones((4, 4)), 10.0)


def test_process_exit_reported():
    with ExternalDenoiser(plugin_cmd("echo")) as den:
        den._proc.kill()
        den._proc.wait()
        with pytest.raises(ProtocolError):
            den(np.ones((4, 4)), 10.0)


def test_missing_handshake_is_handshake_error():
    with pytest.raises(HandshakeError):
        ExternalDenoiser([sys.executable, "-c", "print('hello')"], timeout=2.0)
