"""Adam update rule against an independently coded scalar recursion."""

import math

import numpy as np
import pytest

from cfisac.optim import AdamState, adam_step


def scalar_adam_reference(grad_fn, p0, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    """Hand-rolled scalar Adam recursion used as the oracle."""
    p, m, v = p0, 0.0, 0.0
    trajectory = []
    for t in range(1, steps + 1):
        g = grad_fn(p)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p = p - lr * m_hat / (math.sqrt(v_hat) + eps)
        trajectory.append(p)
    return trajectory


def test_zero_gradient_leaves_params_unchanged():
    params = {"w": np.array([1.0, -2.0, 3.0])}
    state = AdamState.for_params(params)
    adam_step(params, {"w": np.zeros(3)}, state)
    np.testing.assert_array_equal(params["w"], [1.0, -2.0, 3.0])
    assert state.t == 1


def test_first_step_is_signed_learning_rate():
    for g in (0.3, -17.0, 2e-6):
        params = {"w": np.array([0.0])}
        state = AdamState.for_params(params, lr=0.01)
        adam_step(params, {"w": np.array([g])}, state)
        # bias correction makes m_hat = g, v_hat = g^2 at t=1; eps shifts the
        # magnitude slightly for small g, hence the loose tolerance
        np.testing.assert_allclose(params["w"], [-0.01 * np.sign(g)], rtol=1e-2)


def test_three_step_trajectory_matches_reference():
    """f(p) = p^2, p0 = 1, lr = 0.1: every iterate matches the oracle."""
    expected = scalar_adam_reference(lambda p: 2.0 * p, 1.0, 0.1, steps=3)
    params = {"p": np.array([1.0])}
    state = AdamState.for_params(params, lr=0.1)
    seen = []
    for _ in range(3):
        adam_step(params, {"p": 2.0 * params["p"]}, state)
        seen.append(float(params["p"][0]))
    np.testing.assert_allclose(seen, expected, rtol=1e-14)


def test_deterministic_bitwise(rng):
    shapes = {"a": (3, 4), "b": (7,)}
    p1 = {k: rng.normal(size=s) for k, s in shapes.items()}
    p2 = {k: v.copy() for k, v in p1.items()}
    g = {k: rng.normal(size=s) for k, s in shapes.items()}
    s1 = AdamState.for_params(p1, lr=3e-3)
    s2 = AdamState.for_params(p2, lr=3e-3)
    for _ in range(5):
        adam_step(p1, g, s1)
        adam_step(p2, g, s2)
    for k in shapes:
        assert np.array_equal(p1[k], p2[k])
        assert np.array_equal(s1.m[k], s2.m[k])
        assert np.array_equal(s1.v[k], s2.v[k])


def test_nonfinite_gradient_rejected_with_name():
    params = {"bad_layer": np.ones(2)}
    state = AdamState.for_params(params)
    with pytest.raises(ValueError, match="bad_layer"):
        adam_step(params, {"bad_layer": np.array([1.0, np.nan])}, state)
    assert state.t == 0
    np.testing.assert_array_equal(params["bad_layer"], np.ones(2))


def test_moment_invariants(rng):
    params = {"w": rng.normal(size=(4,))}
    state = AdamState.for_params(params)
    for t in range(1, 6):
        adam_step(params, {"w": rng.normal(size=(4,))}, state)
        assert state.t == t
        assert np.all(state.v["w"] >= 0.0)
        assert state.m["w"].shape == params["w"].shape
