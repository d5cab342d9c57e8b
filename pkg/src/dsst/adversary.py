"""Sparse sensor attacks and the per-node sanity check on measurement windows."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import AttackPlanError, WarmupError
from .model import LtiSystem

DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True, eq=False)
class ConsistentFakeState:
    """Replace the node's readings by those of a fake trajectory from ``x0``."""

    x0: np.ndarray


@dataclass(frozen=True, eq=False)
class CompanionDrift:
    """Add the scalar sequence generated by ``Ahat`` from the initial window ``e0``."""

    e0: np.ndarray


@dataclass(frozen=True)
class Jump:
    """Add ``offset`` from time ``t0`` on."""

    t0: int
    offset: float


@dataclass(frozen=True, eq=False)
class AttackPlan:
    """Fixed attack support (0-based node ids) and the attack kind per node."""

    kinds: dict = field(default_factory=dict)

    @property
    def support(self) -> tuple:
        return tuple(sorted(self.kinds))

    def validate(self, sys: LtiSystem, s: int) -> "AttackPlan":
        if len(self.kinds) > s:
            raise AttackPlanError(f"{len(self.kinds)} attacked nodes exceed the budget s={s}")
        for node, kind in self.kinds.items():
            if not 0 <= node < sys.p:
                raise AttackPlanError(f"attacked node {node} out of range for p={sys.p}")
            vec = getattr(kind, "x0", getattr(kind, "e0", None))
            if vec is not None and np.asarray(vec).shape != (sys.n,):
                raise AttackPlanError(f"attack vector at node {node} must have length n={sys.n}")
            if not isinstance(kind, (ConsistentFakeState, CompanionDrift, Jump)):
                raise AttackPlanError(f"unknown attack kind {kind!r}")
        return self


NO_ATTACK = AttackPlan()


def generate_attack(plan: AttackPlan, sys: LtiSystem, x_t, t: int) -> np.ndarray:
    """Additive attack ``e[t]`` for all ``p`` nodes (zero off the support)."""
    e = np.zeros(sys.p)
    if not plan.kinds:
        return e
    x_t = np.asarray(x_t, dtype=float)
    for node, kind in plan.kinds.items():
        C_i = sys.C[node]
        if isinstance(kind, ConsistentFakeState):
            fake = sys.power(t) @ np.asarray(kind.x0, dtype=float)
            e[node] = C_i @ fake - C_i @ x_t
        elif isinstance(kind, CompanionDrift):
            window = np.linalg.matrix_power(sys.companion, t) @ np.asarray(kind.e0, dtype=float)
            e[node] = window[0]
        elif isinstance(kind, Jump):
            e[node] = kind.offset if t >= kind.t0 else 0.0
        else:
            raise AttackPlanError(f"unknown attack kind {kind!r}")
    return e


@dataclass(frozen=True)
class SanityResult:
    passed: bool
    residual: float

    def __bool__(self):
        return self.passed


def local_sanity_check(window_prev, window_next, Ahat, epsilon: float = DEFAULT_EPSILON) -> SanityResult:
    """Pass iff ``|| Z[tau+1] - Ahat Z[tau] ||_2 <= epsilon``."""
    prev = np.asarray(window_prev, dtype=float)
    nxt = np.asarray(window_next, dtype=float)
    if np.isnan(prev).any() or np.isnan(nxt).any():
        raise WarmupError("measurement window not full yet; sanity check skipped")
    res = float(np.linalg.norm(nxt - np.asarray(Ahat) @ prev))
    return SanityResult(passed=res <= epsilon, residual=res)


def sanity_residuals(Z_prev, Z_next, Ahat) -> np.ndarray:
    """Vectorized residuals for all nodes; rows of ``Z_*`` are windows."""
    return kernels.current().sanity_residuals(
        np.ascontiguousarray(Z_prev, dtype=float),
        np.ascontiguousarray(Z_next, dtype=float),
        np.ascontiguousarray(Ahat, dtype=float),
    )
