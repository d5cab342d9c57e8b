"""Detectability and sparse detectability by exhaustive PBH testing.

All subset enumerations are lexicographic (``itertools.combinations`` over
0-based sensor ids, by increasing size), so witnesses are reproducible.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.linalg

from .errors import BudgetExceeded
from .model import UNSTABLE_TOL, LtiSystem

#: singular values below RANK_RTOL * sigma_max count as zero
RANK_RTOL = 1e-9
MAX_NODES = 20
DEFAULT_BUDGET = 200_000


def numerical_rank(M, rtol: float = RANK_RTOL) -> int:
    M = np.asarray(M)
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def pbh_witness(A, Cmat) -> complex | None:
    """First unstable eigenvalue failing the PBH rank test, or ``None``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    Cmat = np.asarray(Cmat, dtype=float).reshape(-1, n)
    for mu in np.linalg.eigvals(A):
        if abs(mu) < 1.0 - UNSTABLE_TOL:
            continue
        pencil = np.vstack([A - mu * np.eye(n), Cmat.astype(complex)])
        if numerical_rank(pencil) < n:
            return complex(mu)
    return None


def is_detectable(A, Cmat) -> bool:
    """PBH detectability: every unstable mode of ``A`` is seen by ``Cmat``."""
    return pbh_witness(A, Cmat) is None


def erasure_operator(D, V) -> np.ndarray:
    """Orthonormal-row ``L`` with ``ker(L) = D span{e_i : i in V}``.

    Returns an array of shape ``(v - rank(D[:, V]), v)``; ``L`` may have no
    rows when the erased columns span the whole compressed space.
    """
    D = np.atleast_2d(np.asarray(D, dtype=float))
    v = D.shape[0]
    V = list(V)
    if not V:
        return np.eye(v)
    cols = D[:, V]
    if not np.any(cols):
        return np.eye(v)
    basis = scipy.linalg.null_space(cols.T, rcond=RANK_RTOL)
    return basis.T


def _check_size(p: int):
    if p > MAX_NODES:
        raise BudgetExceeded(f"p={p} exceeds the exhaustive-search guard of {MAX_NODES} nodes")


class _Budget:
    def __init__(self, limit):
        self.limit = limit
        self.used = 0

    def charge(self, count: int):
        self.used += count
        if self.limit is not None and self.used > self.limit:
            raise BudgetExceeded(
                f"subset enumeration needs more than {self.limit} PBH tests; "
                "lower p or the sparsity level"
            )


@dataclass(frozen=True)
class DetectabilityReport:
    """Certified sparse detectability index.

    ``witness`` is the removed sensor subset (0-based) at the first failing
    level and ``witness_eigenvalue`` the unstable mode it hides. ``exhaustive``
    is False when enumeration stopped early at ``max_level``, in which case
    ``index`` is only a lower bound.
    """

    index: int
    witness: tuple | None
    witness_eigenvalue: complex | None
    exhaustive: bool = True

    def recheck_witness(self, sys: LtiSystem) -> bool:
        """True when the stored witness really fails the PBH test."""
        if self.witness is None:
            return False
        keep = [i for i in range(sys.p) if i not in self.witness]
        return not is_detectable(sys.A, sys.C[keep])


def sparse_detectability_index(
    sys: LtiSystem, max_level: int | None = None, budget: int | None = DEFAULT_BUDGET
) -> DetectabilityReport:
    """Largest ``k`` such that removing any ``<= k`` sensors keeps ``(A, C_K)`` detectable."""
    p = sys.p
    _check_size(p)
    top = p if max_level is None else min(p, max_level)
    spend = _Budget(budget)
    for k in range(0, top + 1):
        spend.charge(comb(p, k))
        for removed in itertools.combinations(range(p), k):
            keep = [i for i in range(p) if i not in removed]
            mu = pbh_witness(sys.A, sys.C[keep])
            if mu is not None:
                return DetectabilityReport(k - 1, tuple(removed), mu)
    return DetectabilityReport(top, None, None, exhaustive=(top == p))


@dataclass(frozen=True)
class SparseDetectabilityCheck:
    """Result of the sparse-detectability test relative to a compression matrix."""

    ok: bool
    s: int
    witness: tuple | None = None
    witness_eigenvalue: complex | None = None

    def __bool__(self):
        return self.ok


def is_sparse_detectable_wrt(
    sys: LtiSystem, D, s: int, budget: int | None = DEFAULT_BUDGET
) -> SparseDetectabilityCheck:
    """Check ``(A, L D C)`` detectable for every erasure ``L`` of ``<= s`` sensors."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    p = sys.p
    if D.shape[1] != p:
        raise ValueError(f"D must have p={p} columns, got {D.shape}")
    if not 0 <= s <= p:
        raise ValueError(f"sparsity s={s} must lie in [0, p={p}]")
    _check_size(p)
    spend = _Budget(budget)
    DC = D @ sys.C
    for k in range(0, s + 1):
        spend.charge(comb(p, k))
        for V in itertools.combinations(range(p), k):
            L = erasure_operator(D, V)
            mu = pbh_witness(sys.A, L @ DC)
            if mu is not None:
                return SparseDetectabilityCheck(False, s, tuple(V), mu)
    return SparseDetectabilityCheck(True, s)


def is_dsst_solvable(sys: LtiSystem, s: int, budget: int | None = DEFAULT_BUDGET) -> bool:
    """Solvable iff the pair is ``2s``-sparse detectable."""
    if 2 * s > sys.p:
        return False
    return sparse_detectability_index(sys, max_level=2 * s, budget=budget).index >= 2 * s
