import numpy as np
import pytest


def random_spd(p, rng, scale=1.0, cond=None):
    """Random symmetric positive definite matrix."""
    A = rng.standard_normal((p, p))
    M = A @ A.T / p + 0.1 * np.eye(p)
    if cond is not None:
        w, V = np.linalg.eigh(M)
        w = np.geomspace(1.0 / cond, 1.0, p)
        M = (V * w) @ V.T
    return scale * 0.5 * (M + M.T)


def random_psd_singular(p, rank, rng, scale=1.0):
    """Random PSD matrix of the given rank (sample-covariance style)."""
    A = rng.standard_normal((rank, p))
    M = A.T @ A / rank
    return scale * 0.5 * (M + M.T)


def random_rotation(p, rng):
    """Haar-ish rotation matrix (orthogonal with determinant +1)."""
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
