import numpy as np
import pytest


class IdentityOperator:
    """Trivial measurement operator A = I for separable solver tests."""

    kind = "identity"

    def __init__(self, shape):
        self.shape = tuple(shape)
        self.n_measurements = shape[0] * shape[1]
        self.gram_scale = 1.0

    def forward(self, x):
        return np.asarray(x, dtype=np.complex128).ravel()

    def adjoint(self, u):
        return np.asarray(u, dtype=np.complex128).reshape(self.shape)

    def amplitude(self, x):
        return np.abs(self.forward(x))


@pytest.fixture
def identity_op():
    return IdentityOperator((8, 8))
