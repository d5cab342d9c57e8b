import itertools

import numpy as np
import pytest

from dsst.model import LtiSystem


def kalman_detectable(A, Cmat, tol=1e-9, scale=None):
    """Detectability via the unobservable subspace (independent of the PBH code).

    The unobservable subspace is A-invariant; detectability means A restricted
    to it has no eigenvalue on or outside the unit circle.
    """
    A = np.asarray(A, float)
    n = A.shape[0]
    Cmat = np.asarray(Cmat, float).reshape(-1, n)
    if Cmat.shape[0] == 0:
        U = np.eye(n)
    else:
        O = np.vstack([Cmat @ np.linalg.matrix_power(A, k) for k in range(n)])
        _, sv, Vt = np.linalg.svd(O)
        cut = tol * (scale if scale is not None else (sv[0] if sv.size else 0.0))
        U = Vt[int(np.sum(sv > cut)) :].T
    if U.shape[1] == 0:
        return True
    restricted = U.T @ A @ U
    return bool(np.all(np.abs(np.linalg.eigvals(restricted)) < 1 - 1e-12))


def brute_index(A, C):
    """Largest k with every (p-k)-sensor subsystem detectable, by brute force."""
    p = C.shape[0]
    best = -1
    for k in range(p + 1):
        ok = all(
            kalman_detectable(A, C[[i for i in range(p) if i not in rem]])
            for rem in itertools.combinations(range(p), k)
        )
        if not ok:
            break
        best = k
    return best


def sparse_system(rng, n, p, zero_prob=0.5):
    """Random system whose sensors see only a few coordinates (gives varied indices)."""
    A = np.diag(rng.choice([0.5, 1.3, 2.0, -1.5], size=n))
    C = rng.standard_normal((p, n)) * (rng.random((p, n)) > zero_prob)
    return LtiSystem(A, C)


def brute_force(W, sys, D, s):
    """Residual of every support by one dense least-squares solve each."""
    n, p = sys.n, sys.p
    y = p * np.asarray(W)
    Dn = np.kron(D, np.eye(n))
    out = {}
    for k in range(s + 1):
        for K in itertools.combinations(range(p), k):
            inject = np.zeros((p * n, k * n))
            for idx, node in enumerate(K):
                inject[node * n : (node + 1) * n, idx * n : (idx + 1) * n] = np.eye(n)
            M = np.hstack([Dn @ sys.observability.stacked, Dn @ inject])
            z, *_ = np.linalg.lstsq(M, y, rcond=None)
            out[K] = (float(np.linalg.norm(y - M @ z)), z[:n])
    return out


def noiseless_W(sys, D, x, E):
    return np.kron(D, np.eye(sys.n)) @ (sys.observability.stacked @ x + E) / sys.p


def block_attack(rng, sys, K):
    E = np.zeros(sys.p * sys.n)
    for node in K:
        E[node * sys.n : (node + 1) * sys.n] = 3 * rng.standard_normal(sys.n)
    return E


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
