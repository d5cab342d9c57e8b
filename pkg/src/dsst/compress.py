"""Compression matrix certification, random-search design and kernel basis."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .detect import DEFAULT_BUDGET, RANK_RTOL, is_dsst_solvable, is_sparse_detectable_wrt
from .errors import CertificationError
from .model import LtiSystem

log = logging.getLogger(__name__)


def kernel_basis(D, n: int) -> np.ndarray:
    """Orthonormal basis of ``ker(D kron I_n)``, built as ``null(D) kron I_n``."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    null = scipy.linalg.null_space(D, rcond=RANK_RTOL)
    return np.kron(null, np.eye(n))


@dataclass(frozen=True, eq=False)
class CompressionMatrix:
    """Certified compression ``D`` (v x p) with the kernel basis of ``D kron I_n``.

    ``certified_s`` is the attack budget ``s`` for which ``2s``-sparse
    detectability relative to ``D`` was verified.
    """

    D: np.ndarray
    certified_s: int
    kernel: np.ndarray

    @property
    def v(self) -> int:
        return self.D.shape[0]

    @property
    def p(self) -> int:
        return self.D.shape[1]

    def recheck(self, sys: LtiSystem) -> bool:
        return bool(is_sparse_detectable_wrt(sys, self.D, 2 * self.certified_s))


def validate_compression(sys: LtiSystem, D, s: int, budget=DEFAULT_BUDGET) -> CompressionMatrix:
    """Certify ``D`` for attack budget ``s`` or raise with the failing erasure."""
    D = np.array(np.atleast_2d(np.asarray(D, dtype=float)), copy=True)
    v, p = D.shape
    if p != sys.p:
        raise ValueError(f"D must have p={sys.p} columns, got {D.shape}")
    if v > p:
        raise ValueError(f"D has more rows ({v}) than nodes ({p})")
    level = min(2 * s, p)
    check = is_sparse_detectable_wrt(sys, D, level, budget=budget)
    if 2 * s > p or not check:
        witness = check.witness if not check else tuple(range(p))
        raise CertificationError(
            f"(A, C) is not {2 * s}-sparse detectable with respect to D; "
            f"erasing sensors {witness} hides an unstable mode",
            witness=witness,
            eigenvalue=check.witness_eigenvalue,
        )
    D.setflags(write=False)
    N = kernel_basis(D, sys.n)
    N.setflags(write=False)
    return CompressionMatrix(D=D, certified_s=s, kernel=N)


def identity_compression(sys: LtiSystem, s: int, **kw) -> CompressionMatrix:
    return validate_compression(sys, np.eye(sys.p), s, **kw)


def design_compression(
    sys: LtiSystem, s: int, seed: int = 0, max_tries: int = 20, budget=DEFAULT_BUDGET
) -> CompressionMatrix:
    """Smallest-``v`` random Gaussian ``D`` that certifies, else the identity.

    Try ``k`` at row count ``v`` draws from ``SeedSequence([seed, v, k])`` so
    the result does not depend on evaluation order.
    """
    if not is_dsst_solvable(sys, s, budget=budget):
        raise CertificationError(
            f"(A, C) is not {2 * s}-sparse detectable; no compression matrix can be certified"
        )
    p = sys.p
    for v in range(1, p):
        for k in range(max_tries):
            rng = np.random.default_rng(np.random.SeedSequence([seed, v, k]))
            D = rng.standard_normal((v, p))
            try:
                cm = validate_compression(sys, D, s, budget=budget)
            except CertificationError:
                continue
            log.debug("certified random D with v=%d on try %d", v, k)
            return cm
    return identity_compression(sys, s, budget=budget)
