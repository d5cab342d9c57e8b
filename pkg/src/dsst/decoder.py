"""Secure state reconstruction from tracked compressed measurements.

Given a node's estimate ``W_i`` of ``(1/p) (D kron I_n) Y``, the decoder
rescales by ``p`` and searches all attack supports ``K`` with ``|K| <= s``::

    min_{x, E_K} || p W_i - (D kron I_n) (O x + E_K) ||_2

For each ``K`` the attack blocks are eliminated by projecting onto the
orthogonal complement of ``(D kron I_n)`` restricted to ``K``; what remains is
an ordinary least-squares problem in ``x``. Every per-support operator depends
only on ``(A, C, D, K)`` and is factored once.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .compress import CompressionMatrix, kernel_basis
from .detect import RANK_RTOL, erasure_operator
from .errors import DecoderRankError
from .model import LtiSystem

#: residuals within TIE_RTOL * max(1, ||target||) of the minimum count as ties
TIE_RTOL = 1e-9


def _supports(p: int, s: int):
    for k in range(0, min(s, p) + 1):
        yield from itertools.combinations(range(p), k)


def _as_D(D) -> np.ndarray:
    if isinstance(D, CompressionMatrix):
        return np.asarray(D.D)
    return np.atleast_2d(np.asarray(D, dtype=float))


def erased_observability(sys: LtiSystem, D, K) -> np.ndarray:
    """``(L_K kron I_n)(D kron I_n) O`` with orthonormal-row ``L_K``."""
    D = _as_D(D)
    L = erasure_operator(D, K)
    return np.kron(L @ D, np.eye(sys.n)) @ sys.observability.stacked


def _sigma_min_checked(M, K, what: str) -> float:
    n = M.shape[1]
    if M.shape[0] < n:
        raise DecoderRankError(
            f"{what}: erasing support {tuple(K)} leaves {M.shape[0]} equations for {n} unknowns",
            K,
        )
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0 or sv[-1] <= RANK_RTOL * sv[0]:
        raise DecoderRankError(
            f"{what}: state not identifiable after erasing support {tuple(K)} "
            f"(sigma_min={sv[-1]:.3e}); the pair is only detectable there",
            K,
        )
    return float(sv[-1])


def error_bound_beta(sys: LtiSystem, D, s: int) -> float:
    """Worst-case ``2 / sigma_min`` over all erasures of ``<= 2s`` sensors."""
    beta = 0.0
    for K in _supports(sys.p, 2 * s):
        smin = _sigma_min_checked(erased_observability(sys, D, K), K, "error bound")
        beta = max(beta, 2.0 / smin)
    return beta


def propagate_estimate(x_hat_base, A, steps: int) -> np.ndarray:
    """``A**steps @ x_hat_base``."""
    return np.linalg.matrix_power(np.asarray(A, dtype=float), steps) @ np.asarray(x_hat_base, dtype=float)


@dataclass(frozen=True, eq=False)
class DecodeResult:
    """Decoded window-base state and the attack explanation that goes with it."""

    x_hat: np.ndarray
    x_hat_now: np.ndarray
    support_hat: tuple
    residual: float
    E_hat: np.ndarray
    residuals: dict = field(default_factory=dict)


class SsrDecoder:
    """Exhaustive-support decoder with per-support operators factored up front.

    Supports are ordered by size, then lexicographically; among residuals
    tied within tolerance the first in that order wins.
    """

    def __init__(self, sys: LtiSystem, D, s: int):
        self.sys = sys
        self.D = _as_D(D)
        self.s = s
        if self.D.shape[1] != sys.p:
            raise ValueError(f"D must have p={sys.p} columns, got {self.D.shape}")
        n = sys.n
        self.m = self.D.shape[0] * n
        self.M0 = np.kron(self.D, np.eye(n)) @ sys.observability.stacked
        self.supports = list(_supports(sys.p, s))
        self._A_now = sys.power(n - 1)

        R = np.empty((len(self.supports), self.m, self.m))
        X = np.empty((len(self.supports), n, self.m))
        for k, K in enumerate(self.supports):
            Lk = np.kron(erasure_operator(self.D, K), np.eye(n))
            Ak = Lk @ self.M0
            _sigma_min_checked(Ak, K, "decoder")
            Ak_pinv = np.linalg.pinv(Ak, rcond=RANK_RTOL)
            X[k] = Ak_pinv @ Lk
            # residual in reduced coordinates, lifted back isometrically
            R[k] = Lk.T @ (np.eye(Lk.shape[0]) - Ak @ Ak_pinv) @ Lk
        self._R = np.ascontiguousarray(R)
        self._X = X

    def _targets(self, W) -> np.ndarray:
        W = np.atleast_2d(np.asarray(W, dtype=float))
        if W.shape[1] != self.m:
            raise ValueError(f"W rows must have length v*n={self.m}, got {W.shape[1]}")
        return np.ascontiguousarray(self.sys.p * W)

    def _select(self, res_row, y) -> int:
        best = res_row.min()
        tol = TIE_RTOL * max(1.0, float(np.linalg.norm(y)))
        return int(np.flatnonzero(res_row <= best + tol)[0])

    def _explain(self, y, x_hat, K) -> np.ndarray:
        n, p = self.sys.n, self.sys.p
        E = np.zeros(p * n)
        if K:
            B = np.kron(self.D[:, list(K)], np.eye(n))
            coef, *_ = np.linalg.lstsq(B, y - self.M0 @ x_hat, rcond=RANK_RTOL)
            for idx, node in enumerate(K):
                E[node * n : (node + 1) * n] = coef[idx * n : (idx + 1) * n]
        return E

    def residual_table(self, W) -> np.ndarray:
        """``(q, n_supports)`` residuals for ``q`` stacked estimates."""
        return kernels.current().support_residuals(self._R, self._targets(W))

    def decode(self, W_i) -> DecodeResult:
        y = self._targets(W_i)[0]
        res = kernels.current().support_residuals(self._R, y[None, :])[0]
        k = self._select(res, y)
        K = self.supports[k]
        x_hat = self._X[k] @ y
        return DecodeResult(
            x_hat=x_hat,
            x_hat_now=self._A_now @ x_hat,
            support_hat=K,
            residual=float(res[k]),
            E_hat=self._explain(y, x_hat, K),
            residuals={K_: float(r) for K_, r in zip(self.supports, res)},
        )

    def decode_many(self, W):
        """Fast path for all nodes at once: ``(x_hat_now, supports, residuals)``."""
        Y = self._targets(W)
        res = kernels.current().support_residuals(self._R, Y)
        picks = [self._select(res[a], Y[a]) for a in range(Y.shape[0])]
        x_base = np.einsum("anm,am->an", self._X[picks], Y)
        x_now = x_base @ self._A_now.T
        return x_now, [self.supports[k] for k in picks], res[np.arange(len(picks)), picks]


def ssr_decode(W_i, sys: LtiSystem, D, s: int) -> DecodeResult:
    return SsrDecoder(sys, D, s).decode(W_i)


@dataclass(frozen=True, eq=False)
class SlackInstance:
    """Uncompressed SSR instance ``Y = [O N] [x; r] + E`` with ``E`` block-sparse."""

    matrix: np.ndarray
    target: np.ndarray
    n: int
    p: int


def slack_reduction(W_i, sys: LtiSystem, D) -> SlackInstance:
    """Lift ``p W_i`` to sensor space and append the kernel basis of ``D kron I_n``."""
    D = _as_D(D)
    n = sys.n
    N = D.kernel if isinstance(D, CompressionMatrix) else kernel_basis(D, n)
    y = sys.p * np.asarray(W_i, dtype=float)
    lifted = np.kron(np.linalg.pinv(D), np.eye(n)) @ y
    return SlackInstance(
        matrix=np.hstack([sys.observability.stacked, N]), target=lifted, n=n, p=sys.p
    )


def solve_ssr(inst: SlackInstance, s: int):
    """Exhaustive block-sparse least squares; returns ``(x_hat, support, residual)``.

    Supports are tried by size then lexicographically; the first within the
    tie tolerance of the best residual wins.
    """
    n, p = inst.n, inst.p
    cand = []
    for K in _supports(p, s):
        inject = np.zeros((p * n, len(K) * n))
        for idx, node in enumerate(K):
            inject[node * n : (node + 1) * n, idx * n : (idx + 1) * n] = np.eye(n)
        M = np.hstack([inst.matrix, inject])
        z, *_ = np.linalg.lstsq(M, inst.target, rcond=RANK_RTOL)
        cand.append((float(np.linalg.norm(inst.target - M @ z)), K, z[:n]))
    best = min(c[0] for c in cand)
    tol = TIE_RTOL * max(1.0, float(np.linalg.norm(inst.target)))
    for r, K, x in cand:
        if r <= best + tol:
            return x, K, r
