import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dsst.errors import WarmupError
from dsst.model import (
    LtiSystem,
    MeasurementWindow,
    characteristic_polynomial,
    check_assumption6,
    companion_form,
    discretize,
    observability_stack,
)


def leverrier(A):
    """Faddeev-LeVerrier coefficients, ascending and monic term dropped."""
    n = A.shape[0]
    M = np.zeros_like(A)
    c = [1.0]
    for k in range(1, n + 1):
        M = A @ M + c[-1] * np.eye(n)
        c.append(-np.trace(A @ M) / k)
    # c[k] multiplies lambda^(n-k)
    return np.array(c[1:][::-1])


@pytest.mark.parametrize(
    "A, expected",
    [
        ([[2.0]], [-2.0]),
        ([[0.0, 1.0], [-1.0, 0.0]], [1.0, 0.0]),
        (np.eye(2), [1.0, -2.0]),
    ],
)
def test_characteristic_polynomial_examples(A, expected):
    assert np.allclose(characteristic_polynomial(np.array(A)), expected, atol=1e-12)


@pytest.mark.parametrize(
    "A, expected",
    [
        ([[2.0]], [[2.0]]),
        (np.eye(2), [[0, 1], [-1, 2]]),
        ([[0.0, 1.0], [-1.0, 0.0]], [[0, 1], [-1, 0]]),
    ],
)
def test_companion_examples(A, expected):
    assert np.allclose(companion_form(np.array(A)), expected, atol=1e-12)


small = arrays(np.float64, (3, 3), elements=st.floats(-2, 2, allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(small)
def test_companion_matches_char_poly(A):
    alpha = characteristic_polynomial(A)
    assert np.allclose(alpha, leverrier(A), atol=1e-8)
    assert np.allclose(characteristic_polynomial(companion_form(A)), alpha, atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 4).flatmap(
        lambda n: st.tuples(
            arrays(np.float64, (n, n), elements=st.floats(-1.2, 1.2, allow_nan=False)),
            arrays(np.float64, (2, n), elements=st.floats(-1, 1, allow_nan=False)),
            arrays(np.float64, (n,), elements=st.floats(-1, 1, allow_nan=False)),
        )
    )
)
def test_windows_follow_companion_recursion(args):
    A, C, x0 = args
    sys = LtiSystem(A, C)
    n = sys.n
    xs = [x0]
    for _ in range(2 * n + 2):
        xs.append(A @ xs[-1])
    Y = np.array([C @ x for x in xs])  # (T, p)
    Ahat = sys.companion
    scale = max(1.0, np.abs(Y).max())
    for tau in range(n - 1, Y.shape[0] - 1):
        Z0, Z1 = Y[tau - n + 1 : tau + 1], Y[tau - n + 2 : tau + 2]
        assert np.allclose(Z1, Ahat @ Z0, atol=1e-8 * scale)


def test_observability_examples():
    O = observability_stack(LtiSystem(np.eye(2), [[1, 0]]))
    assert np.array_equal(O.per_node[0], [[1, 0], [1, 0]])
    O = observability_stack(LtiSystem([[1, 1], [0, 1]], [[1, 0]]))
    assert np.array_equal(O.per_node[0], [[1, 0], [1, 1]])
    O = observability_stack(LtiSystem([[2.0]], np.ones((3, 1))))
    assert np.array_equal(O.stacked, np.ones((3, 1)))


def test_observability_blocks_reproduce_windows(rng):
    sys = LtiSystem(rng.standard_normal((3, 3)), rng.standard_normal((4, 3)))
    O = sys.observability
    x = rng.standard_normal(3)
    for i in range(4):
        assert np.array_equal(O.stacked[3 * i : 3 * i + 3], O.per_node[i])
        window = [sys.C[i] @ np.linalg.matrix_power(sys.A, k) @ x for k in range(3)]
        assert np.allclose(O.per_node[i] @ x, window)


def test_discretize_examples():
    assert np.allclose(discretize(np.zeros((2, 2)), 0.7), np.eye(2))
    tau = 0.3
    rot = [[np.cos(tau), np.sin(tau)], [-np.sin(tau), np.cos(tau)]]
    assert np.allclose(discretize([[0, 1], [-1, 0]], tau), rot, atol=1e-14)
    assert np.allclose(discretize([[1.0]], np.log(2)), [[2.0]], atol=1e-14)
    with pytest.raises(ValueError):
        discretize([[1.0]], 0.0)


def test_measurement_window():
    series = np.arange(10.0)
    w = MeasurementWindow.from_series(0, series, tau=5, n=3)
    assert np.array_equal(w.values, [3, 4, 5]) and w.base_time == 3
    with pytest.raises(WarmupError):
        MeasurementWindow.from_series(0, series, tau=1, n=3)


def test_system_validation():
    with pytest.raises(ValueError):
        LtiSystem(np.ones((2, 3)), np.ones((1, 3)))
    with pytest.raises(ValueError):
        LtiSystem(np.eye(2), np.ones((1, 3)))
    sys = LtiSystem([[2.0]], [1.0, 1.0, 1.0])  # 1-D C becomes one row per node
    assert sys.C.shape == (3, 1) and sys.p == 3


@pytest.mark.parametrize(
    "a, spectrum, passed",
    [
        (1.0, [0, 2], True),
        (1.5, [0, 1, 3], False),
        (1.5, [0, 3, 3], True),
    ],
)
def test_sampling_condition_examples(a, spectrum, passed):
    assert check_assumption6(np.array([[a]]), spectrum).passed is passed


def test_sampling_condition_reports_worst_pair():
    rep = check_assumption6(np.array([[1.5]]), [0, 1, 3])
    assert rep.worst_pair[1] == pytest.approx(1.0)
    assert rep.unstable_margin == pytest.approx(1 - (1.5 - 1 / 9) ** 2)
    with pytest.raises(ValueError):
        check_assumption6(np.array([[1.0]]), [0.0, 0.0])
