"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def laplacian_apply(X, indptr, indices, weights):
    X = np.asarray(X, dtype=float)
    rows = np.repeat(np.arange(X.shape[0]), np.diff(indptr))
    contrib = weights[:, None] * (X[rows] - X[indices])
    out = np.zeros_like(X)
    np.add.at(out, rows, contrib)
    return out


def _blockmul(Ahat, X):
    p, m = X.shape
    n = Ahat.shape[0]
    return (X.reshape(p, m // n, n) @ Ahat.T).reshape(p, m)


def tracker_round(W, b, eta, phi, Ahat, indptr, indices, weights, k_I, k_P):
    LW = laplacian_apply(W, indptr, indices, weights)
    Leta = laplacian_apply(eta, indptr, indices, weights)
    W1 = _blockmul(Ahat, W) - W + phi - 2.0 * k_I * Leta
    b1 = _blockmul(Ahat, b) + k_I * LW
    eta1 = k_P * b1 + k_I * laplacian_apply(W1, indptr, indices, weights)
    return W1, b1, eta1


def support_residuals(R, Y):
    proj = np.einsum("krc,ac->akr", R, Y)
    return np.sqrt(np.einsum("akr,akr->ak", proj, proj))


def sanity_residuals(Zprev, Znext, Ahat):
    return np.linalg.norm(Znext - Zprev @ Ahat.T, axis=1)
