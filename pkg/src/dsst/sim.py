"""Synchronous-round simulation of plant, attacks, tracker and decoders.

Timeline (0-based steps ``t = 0 .. T-1``):

* the plant emits ``y[t] = C x[t] + e[t]`` and every node shifts it into its
  window ``Z_i[t] = [y_i[t-n+1], ..., y_i[t]]``;
* at ``t = n-1`` (first full window) the tracker starts from ``W = phi``;
* from ``t = n`` on each step runs the sanity checks, one tracker round fed
  with ``phi[t-1]`` (producing ``W[t]``, which tracks the average of
  ``phi[t]``), and the decoder when the cadence allows;
* decoded window-base states are pushed ``n-1`` steps forward to time ``t``.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .adversary import NO_ATTACK, AttackPlan, ConsistentFakeState, generate_attack, sanity_residuals
from .compress import CompressionMatrix, identity_compression
from .decoder import SsrDecoder, error_bound_beta
from .detect import is_sparse_detectable_wrt, sparse_detectability_index
from .errors import DsstError, ScenarioError
from .graph import CommGraph, check_connected, cycle_graph
from .model import LtiSystem, check_assumption6, discretize
from .tracker import (
    TrackerGains,
    decomposition_diagnostics,
    init_tracker,
    select_gains,
    tracker_step,
    verify_gain_stability,
)

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12
RATE_FLOOR = 1e-12

CSV_COLUMNS = [
    "t",
    "node",
    "w_err",
    "x_err",
    "sanity_pass",
    "sanity_residual",
    "z1_err",
    "z2_norm",
    "decoded_support",
]


@dataclass(eq=False)
class Scenario:
    sys: LtiSystem
    graph: CommGraph
    compression: CompressionMatrix
    s: int
    x0: np.ndarray
    attack: AttackPlan = NO_ATTACK
    horizon: int = 300
    gains: TrackerGains | None = None
    epsilon: float = 1e-6
    seed: int = 0
    decode_cadence: int = 1
    #: added to W[0]; lets diagnostics observe a nonzero average-error mode
    init_offset: np.ndarray | None = None

    def resolved_gains(self) -> TrackerGains:
        if self.gains is not None:
            return self.gains
        if self.graph.p >= 2 and check_connected(self.graph):
            return select_gains(self.graph)
        # forced runs on disconnected graphs still need numbers
        lam_max = float(self.graph.spectrum[-1]) or 1.0
        return TrackerGains(k_P=1.0, k_I=1.0 / (np.sqrt(2.0) * lam_max))


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    data: dict = field(default_factory=dict)


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_scenario(sc: Scenario) -> ValidationReport:
    """Run every pre-flight check; never raises for a failed check."""
    sys, g = sc.sys, sc.graph
    checks = []

    if g.p != sys.p:
        checks.append(CheckResult("dimensions", False, f"graph has {g.p} nodes, system has {sys.p} sensors"))
        return ValidationReport(checks)

    connected = check_connected(g) and g.p >= 2
    checks.append(
        CheckResult(
            "connectivity",
            connected,
            "communication graph is connected" if connected else "communication graph is disconnected",
            {"lambda_2": float(g.spectrum[1]) if g.p > 1 else 0.0},
        )
    )

    if g.spectrum[-1] > 0:
        a6 = check_assumption6(sys, g.spectrum)
        checks.append(
            CheckResult(
                "sampling_condition",
                a6.passed,
                "every mode of A is compatible with the consensus gains"
                if a6.passed
                else f"sampling condition violated (worst pair {a6.worst_pair})",
                {"unstable_margin": a6.unstable_margin, "shift_margin": a6.shift_margin},
            )
        )
    else:
        checks.append(CheckResult("sampling_condition", False, "graph has no edges"))

    report = sparse_detectability_index(sys)
    solvable = report.index >= 2 * sc.s
    checks.append(
        CheckResult(
            "solvability",
            solvable,
            f"solvable (index {report.index} >= {2 * sc.s})"
            if solvable
            else f"not solvable (index {report.index} < {2 * sc.s})",
            {"index": report.index, "witness": report.witness},
        )
    )

    D = sc.compression.D
    cert = is_sparse_detectable_wrt(sys, D, min(2 * sc.s, sys.p)) if D.shape[1] == sys.p else None
    cert_ok = bool(cert) and 2 * sc.s <= sys.p
    checks.append(
        CheckResult(
            "compression",
            cert_ok,
            f"D ({D.shape[0]}x{D.shape[1]}) certified for s={sc.s}"
            if cert_ok
            else f"D fails certification (witness {getattr(cert, 'witness', None)})",
            {"v": int(D.shape[0])},
        )
    )

    gains = sc.resolved_gains()
    stab = verify_gain_stability(sys, g, gains)
    checks.append(
        CheckResult(
            "gain_stability",
            stab.stable,
            f"max spectral radius {stab.max_spectral_radius:.6f}",
            {"max_spectral_radius": stab.max_spectral_radius, "k_P": gains.k_P, "k_I": gains.k_I},
        )
    )

    try:
        sc.attack.validate(sys, sc.s)
        checks.append(
            CheckResult(
                "attack_plan",
                True,
                f"{len(sc.attack.support)} attacked node(s), budget s={sc.s}",
                {"support": tuple(sc.attack.support)},
            )
        )
    except DsstError as exc:
        checks.append(CheckResult("attack_plan", False, str(exc)))
    return ValidationReport(checks)


@dataclass(eq=False)
class ScenarioTrace:
    """Per-step record. Entries before the first full window are NaN/None."""

    n: int
    p: int
    v: int
    warmup: int
    x: np.ndarray
    y: np.ndarray
    target: np.ndarray
    w_err: np.ndarray
    x_err: np.ndarray
    x_hat: np.ndarray
    sanity_pass: np.ndarray
    sanity_residual: np.ndarray
    z1_err: np.ndarray
    z2_norm: np.ndarray
    z1_gap: np.ndarray
    support: list
    diverged: bool = False
    diverged_at: int | None = None
    notes: list = field(default_factory=list)
    rates: dict = field(default_factory=dict)

    def __len__(self):
        return self.x.shape[0]

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self))

    def max_w_err(self) -> np.ndarray:
        return np.max(self.w_err, axis=1) if len(self) else np.empty(0)

    def summary(self) -> dict:
        last = len(self) - 1
        final_x = None
        decoded = np.flatnonzero(~np.isnan(self.x_err[:, 0])) if len(self) else []
        if len(decoded):
            final_x = [float(v) for v in self.x_err[decoded[-1]]]
        return {
            "steps": len(self),
            "diverged": self.diverged,
            "diverged_at": self.diverged_at,
            "final_w_err": [float(v) for v in self.w_err[last]] if last >= self.warmup else None,
            "final_x_err": final_x,
            "fitted_rates": dict(self.rates),
            "notes": list(self.notes),
        }


def fit_decay_rate(errors) -> float:
    """Geometric rate ``alpha`` of ``errors ~ c * alpha**t`` by a log-linear fit.

    The series is cut at the first value below ``1e-12``. If at least three
    points lie at or below a tenth of the initial value the fit uses only those
    (skipping the transient); otherwise it uses the whole series.
    """
    e = np.asarray(errors, dtype=float)
    if e.size < 3:
        raise ValueError("need at least three samples to fit a decay rate")
    if not np.all(np.isfinite(e)) or np.any(e < 0):
        raise ValueError("errors must be finite and nonnegative")
    if e[0] < RATE_FLOOR:
        raise ValueError("series starts at the numeric floor")
    below = np.flatnonzero(e < RATE_FLOOR)
    if below.size:
        e = e[: below[0]]
    if e.size < 3:
        raise ValueError("series hits the numeric floor after fewer than three samples")
    t = np.arange(e.size)
    mask = e <= e[0] / 10.0
    if mask.sum() < 3:
        mask = np.ones_like(mask)
    slope = np.polyfit(t[mask], np.log(e[mask]), 1)[0]
    return float(np.exp(slope))


def _phi(D, Z):
    # phi_i block j = d_ji * Z_i
    p, n = Z.shape
    return np.ascontiguousarray((D.T[:, :, None] * Z[:, None, :]).reshape(p, D.shape[0] * n))


def run_scenario(sc: Scenario, validate: bool = True) -> ScenarioTrace:
    if validate:
        report = validate_scenario(sc)
        if not report.ok:
            raise ScenarioError(
                "scenario validation failed: " + ", ".join(report.failures()), report.failures()
            )
    sys, g = sc.sys, sc.graph
    n, p = sys.n, sys.p
    D = np.asarray(sc.compression.D)
    v = D.shape[0]
    T = int(sc.horizon)
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    if sc.decode_cadence < 1:
        raise ValueError("decode_cadence must be >= 1")
    gains = sc.resolved_gains()
    Ahat = np.ascontiguousarray(sys.companion)

    notes = []
    try:
        decoder = SsrDecoder(sys, D, sc.s)
    except DsstError as exc:
        decoder = None
        notes.append(f"decoding disabled: {exc}")

    nan = np.nan
    tr = ScenarioTrace(
        n=n,
        p=p,
        v=v,
        warmup=n - 1,
        x=np.full((T, n), nan),
        y=np.full((T, p), nan),
        target=np.full((T, v * n), nan),
        w_err=np.full((T, p), nan),
        x_err=np.full((T, p), nan),
        x_hat=np.full((T, p, n), nan),
        sanity_pass=np.full((T, p), nan),
        sanity_residual=np.full((T, p), nan),
        z1_err=np.full(T, nan),
        z2_norm=np.full(T, nan),
        z1_gap=np.full((T, v * n), nan),
        support=[None] * T,
        notes=notes,
    )

    x = np.array(sc.x0, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"x0 must have length n={n}")
    Z = np.full((p, n), nan)
    state = None
    phi_prev = None
    steps = T
    for t in range(T):
        e = generate_attack(sc.attack, sys, x, t)
        y = sys.C @ x + e
        Z_prev = Z
        Z = np.empty_like(Z_prev)
        Z[:, :-1] = Z_prev[:, 1:]
        Z[:, -1] = y
        tr.x[t] = x
        tr.y[t] = y

        if t >= n - 1:
            phi = _phi(D, Z)
            target = phi.mean(axis=0)
            tr.target[t] = target
            if t == n - 1:
                state = init_tracker(phi, g, gains, offset=sc.init_offset)
            else:
                res = sanity_residuals(Z_prev, Z, Ahat)
                tr.sanity_residual[t] = res
                tr.sanity_pass[t] = res <= sc.epsilon
                state = tracker_step(state, phi_prev, g, gains, Ahat)
            tr.w_err[t] = np.linalg.norm(state.W - target[None, :], axis=1)
            diag = decomposition_diagnostics(state, phi)
            tr.z1_err[t] = diag.z1_target_error
            tr.z2_norm[t] = diag.z2_norm
            tr.z1_gap[t] = diag.z1_gap
            phi_prev = phi

            if decoder is not None and t >= n and (t - n) % sc.decode_cadence == 0:
                if np.all(np.isfinite(state.W)):
                    x_now, supports, _ = decoder.decode_many(state.W)
                    tr.x_hat[t] = x_now
                    tr.x_err[t] = np.linalg.norm(x_now - x[None, :], axis=1)
                    tr.support[t] = supports

            worst = np.max(np.abs(state.W))
            if not np.isfinite(worst) or worst > DIVERGENCE_LIMIT or np.nanmax(tr.w_err[t]) > DIVERGENCE_LIMIT:
                tr.diverged, tr.diverged_at = True, t
                notes.append(f"tracker diverged at t={t}; run stopped")
                steps = t + 1
                break
        x = sys.A @ x

    if steps < T:
        for name in ("x", "y", "target", "w_err", "x_err", "x_hat", "sanity_pass",
                     "sanity_residual", "z1_err", "z2_norm", "z1_gap"):
            setattr(tr, name, getattr(tr, name)[:steps])
        tr.support = tr.support[:steps]

    tr.rates = _fit_rates(tr)
    return tr


def _fit_rates(tr: ScenarioTrace) -> dict:
    rates = {}
    start = tr.warmup
    series = {
        "w_err": tr.max_w_err()[start:] if len(tr) > start else np.empty(0),
        "z1_err": tr.z1_err[start:],
        "z2_norm": tr.z2_norm[start:],
    }
    for name, s in series.items():
        try:
            rates[name] = fit_decay_rate(s)
        except ValueError:
            rates[name] = None
    return rates


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else repr(float(v))


def format_support(K) -> str:
    """1-based node ids joined by ';' ('none' for the empty support)."""
    if K is None:
        return ""
    return ";".join(str(i + 1) for i in K) if K else "none"


def write_trace_csv(tr: ScenarioTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for t in range(len(tr)):
            supports = tr.support[t]
            for i in range(tr.p):
                sp = tr.sanity_pass[t, i]
                w.writerow(
                    [
                        t,
                        i + 1,
                        _fmt(tr.w_err[t, i]),
                        _fmt(tr.x_err[t, i]),
                        "" if np.isnan(sp) else ("true" if sp else "false"),
                        _fmt(tr.sanity_residual[t, i]),
                        _fmt(tr.z1_err[t]),
                        _fmt(tr.z2_norm[t]),
                        format_support(supports[i]) if supports is not None else "",
                    ]
                )


def rotation_system(tau: float = 0.1, p: int = 5) -> LtiSystem:
    """Sampled harmonic oscillator read by ``p`` sensors at evenly spread angles."""
    A = discretize(np.array([[0.0, 1.0], [-1.0, 0.0]]), tau)
    angles = np.arange(p) * np.pi / p
    C = np.column_stack([np.cos(angles), np.sin(angles)])
    return LtiSystem(A, C)


def reference_scenario(attacked: int | None = None, horizon: int = 300, **kw) -> Scenario:
    """5-node unit cycle, ``tau = 0.1`` rotation, ``D = I``, ``s = 1``.

    ``attacked`` (0-based) adds one consistent fake-state attacker.
    """
    sys = rotation_system(0.1, 5)
    attack = NO_ATTACK
    if attacked is not None:
        attack = AttackPlan({attacked: ConsistentFakeState(np.array([-2.0, 1.0]))})
    return Scenario(
        sys=sys,
        graph=cycle_graph(5),
        compression=identity_compression(sys, 1),
        s=1,
        x0=np.array([1.0, 0.5]),
        attack=attack,
        horizon=horizon,
        **kw,
    )


def beta_for(sc: Scenario):
    """Error-bound constant for the scenario, or ``None`` when undefined."""
    try:
        return error_bound_beta(sc.sys, sc.compression.D, sc.s)
    except DsstError:
        return None
