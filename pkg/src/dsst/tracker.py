"""Dynamic average consensus tracker for the compressed measurement windows.

Every node ``i`` holds three ``v*n`` vectors: the estimate ``W_i`` of
``(1/p) (D kron I_n) Y``, an integral state ``b_i`` and the broadcast output
``eta_i``. One round, with ``F`` the Laplacian acting across nodes::

    W[t+1]   = (Ahat - I) W[t] + phi[t] - 2 k_I (F eta[t])
    b[t+1]   = Ahat b[t] + k_I (F W[t])
    eta[t+1] = k_P b[t+1] + k_I (F W[t+1])

``Ahat`` acts on each of the ``v`` blocks of length ``n`` separately.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .graph import CommGraph, laplacian_extremes
from .model import LtiSystem


@dataclass(frozen=True)
class TrackerGains:
    k_P: float
    k_I: float


def select_gains(g: CommGraph) -> TrackerGains:
    """``k_P = 1`` and ``k_I = 1 / (sqrt(2) lambda_max(L))``."""
    _, lam_max = laplacian_extremes(g)
    return TrackerGains(k_P=1.0, k_I=1.0 / (np.sqrt(2.0) * lam_max))


def closed_loop_block(Ahat, lam: float, gains: TrackerGains) -> np.ndarray:
    """Disagreement-mode matrix for Laplacian eigenvalue ``lam``."""
    Ahat = np.asarray(Ahat, dtype=float)
    n = Ahat.shape[0]
    kI, kP = gains.k_I, gains.k_P
    I = np.eye(n)
    return np.block(
        [
            [Ahat - I - 2.0 * kI**2 * lam**2 * I, -2.0 * kI * kP * lam * I],
            [kI * lam * I, Ahat],
        ]
    )


@dataclass(frozen=True)
class GainStabilityReport:
    """Spectral radii of the tracker error dynamics.

    ``per_lambda`` maps each distinct nonzero Laplacian eigenvalue to the
    spectral radius of its disagreement block; ``average_radius`` is the radius
    of ``Ahat - I``, which governs the network-average error.
    """

    stable: bool
    max_spectral_radius: float
    average_radius: float
    per_lambda: dict

    def __bool__(self):
        return self.stable


def verify_gain_stability(sys: LtiSystem, g: CommGraph, gains: TrackerGains) -> GainStabilityReport:
    Ahat = sys.companion
    lam_max = g.spectrum[-1]
    nonzero = g.spectrum[g.spectrum > 1e-10 * max(1.0, lam_max)]
    per_lambda = {}
    for lam in np.unique(np.round(nonzero, 12)):
        B = closed_loop_block(Ahat, float(lam), gains)
        per_lambda[float(lam)] = float(np.max(np.abs(np.linalg.eigvals(B))))
    rho_B = max(per_lambda.values(), default=0.0)
    rho_avg = float(np.max(np.abs(np.linalg.eigvals(Ahat - np.eye(sys.n)))))
    return GainStabilityReport(
        stable=bool(rho_B < 1.0 and rho_avg < 1.0),
        max_spectral_radius=rho_B,
        average_radius=rho_avg,
        per_lambda=per_lambda,
    )


@dataclass(frozen=True, eq=False)
class NodeState:
    """One node's tracker variables, each of length ``v*n``."""

    node: int
    W: np.ndarray
    b: np.ndarray
    eta: np.ndarray

    def block(self, j: int, n: int) -> np.ndarray:
        return self.W[j * n : (j + 1) * n]


@dataclass(frozen=True, eq=False)
class TrackerState:
    """All nodes' variables as ``(p, v*n)`` arrays; row ``i`` is node ``i``."""

    W: np.ndarray
    b: np.ndarray
    eta: np.ndarray

    @property
    def p(self) -> int:
        return self.W.shape[0]

    def node(self, i: int) -> NodeState:
        return NodeState(i, self.W[i].copy(), self.b[i].copy(), self.eta[i].copy())

    def nodes(self) -> list[NodeState]:
        return [self.node(i) for i in range(self.p)]

    @classmethod
    def from_nodes(cls, nodes) -> "TrackerState":
        nodes = sorted(nodes, key=lambda s: s.node)
        return cls(
            W=np.array([s.W for s in nodes], dtype=float),
            b=np.array([s.b for s in nodes], dtype=float),
            eta=np.array([s.eta for s in nodes], dtype=float),
        )


def _check_inputs(phi, g: CommGraph, Ahat):
    phi = np.ascontiguousarray(phi, dtype=float)
    n = np.asarray(Ahat).shape[0]
    if phi.ndim != 2 or phi.shape[0] != g.p:
        raise ValueError(f"phi must be (p={g.p}, v*n), got {phi.shape}")
    if phi.shape[1] % n:
        raise ValueError(f"phi row length {phi.shape[1]} is not a multiple of n={n}")
    return phi


def init_tracker(phi0, g: CommGraph, gains: TrackerGains, offset=None) -> TrackerState:
    """``W[0] = phi[0] (+ offset)``, ``b[0] = 0`` and the matching ``eta[0]``."""
    phi0 = np.array(phi0, dtype=float, order="C", copy=True)
    if phi0.ndim != 2 or phi0.shape[0] != g.p:
        raise ValueError(f"phi must be (p={g.p}, v*n), got {phi0.shape}")
    if offset is not None:
        phi0 = np.ascontiguousarray(phi0 + np.broadcast_to(np.asarray(offset, dtype=float), phi0.shape))
    b = np.zeros_like(phi0)
    LW = kernels.current().laplacian_apply(phi0, g.indptr, g.indices, g.weights)
    eta = gains.k_P * b + gains.k_I * LW
    return TrackerState(W=phi0, b=b, eta=eta)


def tracker_step(state: TrackerState, phi, g: CommGraph, gains: TrackerGains, Ahat) -> TrackerState:
    """Advance every node by one synchronous round.

    Node ``i`` only reads ``W_j[t]`` and ``eta_j[t]`` of its neighbors.
    """
    phi = _check_inputs(phi, g, Ahat)
    if state.W.shape != phi.shape:
        raise ValueError(f"state shape {state.W.shape} does not match phi {phi.shape}")
    W1, b1, eta1 = kernels.current().tracker_round(
        np.ascontiguousarray(state.W),
        np.ascontiguousarray(state.b),
        np.ascontiguousarray(state.eta),
        phi,
        np.ascontiguousarray(Ahat, dtype=float),
        g.indptr,
        g.indices,
        g.weights,
        float(gains.k_I),
        float(gains.k_P),
    )
    return TrackerState(W=W1, b=b1, eta=eta1)


@dataclass(frozen=True, eq=False)
class DecompositionDiagnostics:
    """Average/disagreement split of the stacked estimates.

    ``z1`` is ``(1/sqrt(p)) sum_i W_i``; ``z1_gap = z1 - (1/sqrt(p)) sum_i phi_i``
    and ``z2_norm`` is the norm of ``W`` minus its node average.
    """

    z1: np.ndarray
    z1_gap: np.ndarray
    z1_target_error: float
    z2_norm: float


def decomposition_diagnostics(state: TrackerState, phi) -> DecompositionDiagnostics:
    W = np.asarray(state.W)
    phi = np.asarray(phi, dtype=float)
    p = W.shape[0]
    z1 = W.sum(axis=0) / np.sqrt(p)
    gap = z1 - phi.sum(axis=0) / np.sqrt(p)
    z2 = W - W.mean(axis=0, keepdims=True)
    return DecompositionDiagnostics(
        z1=z1,
        z1_gap=gap,
        z1_target_error=float(np.linalg.norm(gap)),
        z2_norm=float(np.linalg.norm(z2)),
    )


def tracking_errors(state: TrackerState, phi) -> np.ndarray:
    """Per-node ``|| W_i - (1/p) sum_j phi_j ||``."""
    phi = np.asarray(phi, dtype=float)
    target = phi.mean(axis=0)
    return np.linalg.norm(state.W - target[None, :], axis=1)

