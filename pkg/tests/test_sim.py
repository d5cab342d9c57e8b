import csv
import dataclasses

import numpy as np
import pytest

from dsst.adversary import AttackPlan, ConsistentFakeState, Jump
from dsst.compress import CompressionMatrix, identity_compression, kernel_basis
from dsst.errors import ScenarioError
from dsst.graph import build_graph, path_graph
from dsst.model import LtiSystem
from dsst.sim import (
    CSV_COLUMNS,
    Scenario,
    fit_decay_rate,
    format_support,
    reference_scenario,
    rotation_system,
    run_scenario,
    validate_scenario,
    write_trace_csv,
)


def test_fit_decay_rate_examples():
    t = np.arange(80)
    assert fit_decay_rate(3.0 * 0.9**t) == pytest.approx(0.9, abs=1e-6)
    assert fit_decay_rate(np.full(30, 2.0)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_decay_rate([1.0, 0.5])
    with pytest.raises(ValueError):
        fit_decay_rate([1.0, 1e-13, 1e-14, 1e-15])


def test_fit_skips_transient_and_floor():
    e = np.concatenate([[5.0, 4.0, 3.0], 0.1 * 0.5 ** np.arange(60), np.zeros(5)])
    assert fit_decay_rate(e) == pytest.approx(0.5, abs=1e-6)


def test_empty_horizon(tmp_path):
    tr = run_scenario(reference_scenario(horizon=0))
    assert len(tr) == 0
    write_trace_csv(tr, tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows == [CSV_COLUMNS]


def test_warmup_has_no_outputs():
    sys = LtiSystem(np.diag([0.5, 0.9, 1.05]), np.random.default_rng(0).standard_normal((5, 3)))
    sc = Scenario(sys, build_graph(5, [(i, (i + 1) % 5) for i in range(5)]), identity_compression(sys, 1), 1, np.ones(3), horizon=20)
    tr = run_scenario(sc)
    n = sys.n
    assert np.all(np.isnan(tr.sanity_pass[:n])) and not np.isnan(tr.sanity_pass[n:]).any()
    assert np.all(np.isnan(tr.x_err[:n])) and not np.isnan(tr.x_err[n:]).any()
    assert all(s is None for s in tr.support[:n])
    assert np.all(np.isnan(tr.w_err[: n - 1])) and not np.isnan(tr.w_err[n - 1]).any()


def test_reference_run_converges():
    tr = run_scenario(reference_scenario(horizon=300))
    assert np.max(tr.x_err[-1]) < 1e-6
    assert np.all(tr.sanity_pass[2:] == 1)
    assert all(K == () for K in tr.support[-1])
    assert tr.summary()["steps"] == 300


def test_attacked_run_identifies_attacker():
    tr = run_scenario(reference_scenario(attacked=3, horizon=300))
    assert np.max(tr.x_err[-1]) < 1e-6
    assert all(K == (3,) for K in tr.support[-1])
    assert np.all(tr.sanity_pass[2:] == 1)


def test_determinism():
    a = run_scenario(reference_scenario(attacked=1, horizon=80))
    b = run_scenario(reference_scenario(attacked=1, horizon=80))
    assert np.array_equal(a.w_err, b.w_err, equal_nan=True) and a.support == b.support


def test_permutation_equivariance():
    perm = np.array([3, 0, 4, 1, 2])  # new node k is old node perm[k]
    inv = np.argsort(perm)
    base = reference_scenario(attacked=2, horizon=150)
    sys = LtiSystem(base.sys.A, base.sys.C[perm])
    edges = [(int(inv[i]), int(inv[j])) for i, j, _ in base.graph.edges]
    sc = dataclasses.replace(
        base,
        sys=sys,
        graph=build_graph(5, edges),
        compression=identity_compression(sys, 1),
        attack=AttackPlan({int(inv[2]): ConsistentFakeState(np.array([-2.0, 1.0]))}),
    )
    a, b = run_scenario(base), run_scenario(sc)
    assert np.allclose(b.w_err[1:], a.w_err[1:, perm], atol=1e-12)
    assert np.allclose(b.x_err[2:], a.x_err[2:, perm], atol=1e-9)
    assert b.support[-1][0] == (int(inv[2]),)


def test_decode_cadence():
    tr = run_scenario(reference_scenario(horizon=40, decode_cadence=5))
    decoded = [t for t in range(40) if tr.support[t] is not None]
    assert decoded == list(range(2, 40, 5))


def test_validation_failures():
    sys = LtiSystem([[1.5]], np.ones((3, 1)))
    D = np.eye(3)
    sc = Scenario(sys, path_graph(3), CompressionMatrix(D, -1, kernel_basis(D, 1)), 1, np.ones(1), horizon=5)
    rep = validate_scenario(sc)
    assert set(rep.failures()) == {"sampling_condition", "gain_stability"}
    with pytest.raises(ScenarioError) as err:
        run_scenario(sc)
    assert "gain_stability" in err.value.failures
    disc = dataclasses.replace(sc, graph=build_graph(3, [(0, 1)]))
    assert "connectivity" in validate_scenario(disc).failures()
    too_many = dataclasses.replace(
        reference_scenario(), attack=AttackPlan({0: Jump(0, 1.0), 1: Jump(0, 1.0)})
    )
    assert validate_scenario(too_many).failures() == ["attack_plan"]


def test_forced_unstable_run_flags_divergence():
    sys = LtiSystem([[1.5]], np.ones((3, 1)))
    D = np.eye(3)
    sc = Scenario(sys, path_graph(3), CompressionMatrix(D, 1, kernel_basis(D, 1)), 1, np.ones(1), horizon=400)
    tr = run_scenario(sc, validate=False)
    assert tr.diverged and len(tr) == tr.diverged_at + 1 < 400
    assert tr.rates["w_err"] > 1


def test_csv_rows(tmp_path):
    tr = run_scenario(reference_scenario(attacked=0, horizon=6))
    path = tmp_path / "trace.csv"
    write_trace_csv(tr, path)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 6 * 5
    last = [r for r in rows if r["t"] == "5"]
    assert [r["node"] for r in last] == ["1", "2", "3", "4", "5"]
    assert rows[0]["w_err"] == "" and rows[0]["decoded_support"] == ""
    assert all(r["sanity_pass"] in ("true", "false") for r in last)
    assert format_support(()) == "none" and format_support((0, 2)) == "1;3"


def test_rotation_system_shape():
    sys = rotation_system(0.2, 4)
    assert sys.C.shape == (4, 2)
    assert np.allclose(sys.A @ sys.A.T, np.eye(2))
