"""Plant model: LTI system, lifted measurement windows and system-side checks.

Conventions
-----------
The characteristic polynomial is monic,
``chi(l) = l**n + alpha[n-1] * l**(n-1) + ... + alpha[0]``, so an attack-free
output sequence obeys ``y[t+n] = -alpha[n-1] y[t+n-1] - ... - alpha[0] y[t]``
and the companion matrix carries ``-alpha`` on its last row.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import WarmupError

#: modes with magnitude at or above this are treated as unstable
UNSTABLE_TOL = 1e-12


def _as_matrix(a, name):
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def characteristic_polynomial(A) -> np.ndarray:
    """Coefficients ``[alpha_0, ..., alpha_{n-1}]`` of the monic char. polynomial."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    # np.poly returns [1, c_{n-1}, ..., c_0]
    coeffs = np.real_if_close(np.poly(A), tol=1e6)
    return np.asarray(np.real(coeffs[1:][::-1]), dtype=float)


def companion_form(A) -> np.ndarray:
    """Controller-form matrix driving the lifted window ``Z[t+1] = Ahat Z[t]``."""
    alpha = characteristic_polynomial(A)
    n = alpha.size
    Ahat = np.eye(n, k=1)
    Ahat[-1, :] = -alpha
    return Ahat


def discretize(A_cont, tau: float) -> np.ndarray:
    """Zero-input sampled-data transition matrix ``exp(A_cont * tau)``."""
    if not tau > 0:
        raise ValueError("sampling period tau must be positive")
    return scipy.linalg.expm(np.asarray(A_cont, dtype=float) * tau)


@dataclass(frozen=True, eq=False)
class ObservabilityStack:
    """Per-node observability matrices and their vertical stack.

    ``per_node[i]`` has rows ``C_i, C_i A, ..., C_i A^(n-1)``; ``stacked`` is
    the ``(p*n, n)`` concatenation in node order.
    """

    per_node: np.ndarray
    stacked: np.ndarray

    def block(self, i: int) -> np.ndarray:
        return self.per_node[i]


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """Autonomous plant ``x[t+1] = A x[t]`` read by ``p`` scalar sensors ``y = C x``."""

    A: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        C = np.array(self.C, dtype=float, copy=True)
        if C.ndim == 1:
            # a bare vector is one row per node for n == 1
            C = C.reshape(-1, A.shape[0]) if A.shape[0] == 1 else C.reshape(1, -1)
        C = _as_matrix(C, "C")
        if A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise ValueError(f"A must be square and non-empty, got {A.shape}")
        if C.shape[1] != A.shape[0] or C.shape[0] < 1:
            raise ValueError(
                f"C must be p x n with n={A.shape[0]} and p >= 1, got {C.shape}"
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @cached_property
    def companion(self) -> np.ndarray:
        Ahat = companion_form(self.A)
        Ahat.setflags(write=False)
        return Ahat

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)

    @cached_property
    def observability(self) -> ObservabilityStack:
        return observability_stack(self)

    def unstable_eigenvalues(self) -> np.ndarray:
        ev = self.eigenvalues
        return ev[np.abs(ev) >= 1.0 - UNSTABLE_TOL]

    def power(self, k: int) -> np.ndarray:
        return np.linalg.matrix_power(self.A, k)


def observability_stack(sys: LtiSystem) -> ObservabilityStack:
    n, p = sys.n, sys.p
    per_node = np.empty((p, n, n))
    row = sys.C.copy()
    for j in range(n):
        per_node[:, j, :] = row
        row = row @ sys.A
    per_node.setflags(write=False)
    stacked = per_node.reshape(p * n, n)
    return ObservabilityStack(per_node=per_node, stacked=stacked)


@dataclass(frozen=True, eq=False)
class MeasurementWindow:
    """Causal window of the last ``n`` measurements of one node.

    ``values = [y[tau-n+1], ..., y[tau]]``; ``base_time = tau - n + 1`` is the
    time whose state the window reconstructs.
    """

    node: int
    values: np.ndarray
    base_time: int

    @classmethod
    def from_series(cls, node: int, series, tau: int, n: int) -> "MeasurementWindow":
        series = np.asarray(series, dtype=float)
        if tau - n + 1 < 0 or tau >= series.shape[0]:
            raise WarmupError(f"window ending at t={tau} needs {n} samples")
        values = series[tau - n + 1 : tau + 1].copy()
        return cls(node=node, values=values, base_time=tau - n + 1)


@dataclass(frozen=True)
class Assumption6Report:
    """Outcome of the sampling-rate condition on ``A`` versus the graph spectrum.

    ``worst_pair`` is the (eigenvalue of A, nonzero Laplacian eigenvalue)
    attaining the smallest margin among unstable modes, or ``None`` when ``A``
    has no unstable mode. Margins are ``1 - value``; positive means satisfied.
    """

    passed: bool
    worst_pair: tuple | None
    unstable_margin: float | None
    shift_margin: float
    margins: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed


def check_assumption6(sys_or_A, laplacian_spectrum) -> Assumption6Report:
    """Check that every mode of ``A`` is compatible with the consensus gains.

    (i) every unstable eigenvalue ``m + jn`` and nonzero Laplacian eigenvalue
    ``lam`` satisfy ``(m - lam^2/lam_max^2)^2 + n^2 < 1``; (ii) every
    eigenvalue satisfies ``(m - 1)^2 + n^2 < 1``.
    """
    A = sys_or_A.A if isinstance(sys_or_A, LtiSystem) else np.asarray(sys_or_A, float)
    spectrum = np.sort(np.asarray(laplacian_spectrum, dtype=float))
    if spectrum.size == 0:
        raise ValueError("empty Laplacian spectrum")
    lam_max = spectrum[-1]
    nonzero = spectrum[spectrum > 1e-10 * max(1.0, lam_max)]
    if nonzero.size == 0:
        raise ValueError("Laplacian spectrum has no nonzero eigenvalue")

    ev = np.linalg.eigvals(A)
    shift_vals = np.abs(ev - 1.0) ** 2
    shift_margin = float(1.0 - shift_vals.max())

    unstable = ev[np.abs(ev) >= 1.0 - UNSTABLE_TOL]
    worst_pair, unstable_margin = None, None
    if unstable.size:
        ratio = nonzero**2 / lam_max**2
        # value[k, l] for unstable mode k and Laplacian eigenvalue l
        vals = (unstable.real[:, None] - ratio[None, :]) ** 2 + unstable.imag[:, None] ** 2
        k, l = np.unravel_index(np.argmax(vals), vals.shape)
        unstable_margin = float(1.0 - vals[k, l])
        worst_pair = (complex(unstable[k]), float(nonzero[l]))

    passed = shift_margin > 0 and (unstable_margin is None or unstable_margin > 0)
    return Assumption6Report(
        passed=bool(passed),
        worst_pair=worst_pair,
        unstable_margin=unstable_margin,
        shift_margin=shift_margin,
        margins={"unstable_modes": unstable_margin, "all_modes_shift": shift_margin},
    )
