import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otclt.costs import (CostError, CostSpec, evaluate_cost, grad_conjugate, gradient,
                         validate_assumptions)
from otclt.rng import stream


def test_evaluate_cost_examples():
    assert evaluate_cost(CostSpec.power(2, d=2), (1, 0), (0, 0)) == 1.0
    assert evaluate_cost(CostSpec.power(3), 2, 0) == 8.0
    assert evaluate_cost(CostSpec.power(1.5, d=3), (1, 2, 3), (1, 2, 3)) == 0.0


def test_dimension_mismatch():
    with pytest.raises(CostError):
        evaluate_cost(CostSpec.power(2, d=2), (1, 0, 0), (0, 0))


def test_gradient_examples():
    np.testing.assert_allclose(gradient(CostSpec.power(2, d=2), (3, 4)), [6, 8])
    np.testing.assert_array_equal(gradient(CostSpec.power(2, d=2), (0, 0)), [0, 0])
    # the p < 2 formula is singular at 0; the subgradient 0 is used
    np.testing.assert_array_equal(gradient(CostSpec.power(1.5), 0.0), [0.0])


def test_gradient_p15_finite_difference():
    spec = CostSpec.power(1.5)
    eps = 1e-6
    fd = (evaluate_cost(spec, 1 + eps, 0) - evaluate_cost(spec, 1 - eps, 0)) / (2 * eps)
    assert abs(fd - 1.5) < 1e-8
    assert gradient(spec, 1.0)[0] == pytest.approx(fd, abs=1e-8)


def test_grad_conjugate_examples():
    np.testing.assert_allclose(grad_conjugate(CostSpec.power(2, d=2), (6, 8)), [3, 4])
    for p in (1.5, 2, 3, 4):
        np.testing.assert_array_equal(grad_conjugate(CostSpec.power(p, d=2), (0, 0)), [0, 0])


def test_grad_conjugate_p3_bisection():
    # solve 3 v^2 sign(v) = 3 by bisection
    lo, hi = 0.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if 3 * mid * mid < 3 else (lo, mid)
    assert grad_conjugate(CostSpec.power(3), 3.0)[0] == pytest.approx(lo, abs=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_inverse_gradient_round_trip(p, d):
    spec = CostSpec.power(p, d)
    rng = stream(11, "round-trip", d)
    w = rng.normal(size=(1000, d))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    v = w * 10 ** rng.uniform(-3, 3, size=(1000, 1))
    back = spec.grad_inv_of(spec.grad_of(v))
    err = np.linalg.norm(back - v, axis=1)
    assert np.all(err <= 1e-8 * (1 + np.linalg.norm(v, axis=1)))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_gradient_matches_finite_differences(p):
    d = 2
    spec = CostSpec.power(p, d)
    rng = stream(5, "fd", p)
    v = rng.uniform(-2, 2, size=(1000, d))
    v = v[np.linalg.norm(v, axis=1) > 1e-2]
    step = 1e-6
    fd = np.stack([(spec.h_of(v + step * e) - spec.h_of(v - step * e)) / (2 * step)
                   for e in np.eye(d)], axis=1)
    assert np.max(np.abs(fd - spec.grad_of(v))) <= 1e-4


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_subgradient_inequality(p):
    spec = CostSpec.power(p, 2)
    rng = stream(3, "convexity", p)
    u = rng.normal(size=(1000, 2)) * 3
    v = rng.normal(size=(1000, 2)) * 3
    lhs = spec.h_of(u)
    rhs = spec.h_of(v) + np.sum(spec.grad_of(v) * (u - v), axis=1)
    assert np.all(lhs >= rhs - 1e-10 * (1 + np.abs(lhs)))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_validate_power_costs_pass(p):
    rep = validate_assumptions(CostSpec.power(p, d=2), probes=200, rng_seed=1)
    assert rep.passed and rep.strict_convexity and rep.superlinear_growth
    assert "not numerically checkable" in rep.cone_condition


def test_validate_rejects_norm():
    norm = CostSpec.custom(lambda v: np.linalg.norm(v, axis=-1), d=2, name="norm")
    rep = validate_assumptions(norm, probes=50, rng_seed=0)
    assert not rep.strict_convexity
    assert not rep.passed


def test_parse_cost_string():
    spec = CostSpec.parse("power:2")
    assert spec.p == 2.0 and spec.d == 1
    for bad in ("power:1", "power:x", "quad:2", "power", "power:0.5"):
        with pytest.raises(CostError):
            CostSpec.parse(bad)


def test_custom_without_gradient_is_configuration_error():
    spec = CostSpec.custom(lambda v: np.sum(v ** 2, axis=-1), d=1)
    with pytest.raises(CostError):
        gradient(spec, 1.0)
    with pytest.raises(CostError):
        grad_conjugate(spec, 1.0)


def test_custom_quadratic_matches_power():
    spec = CostSpec.custom(lambda v: np.sum(v * v, axis=-1), lambda v: 2 * v, lambda z: z / 2, d=2)
    np.testing.assert_allclose(gradient(spec, (3, 4)), [6, 8])
    np.testing.assert_allclose(grad_conjugate(spec, (6, 8)), [3, 4])
    assert validate_assumptions(spec).passed


@settings(max_examples=50, deadline=None)
@given(st.floats(1.05, 5.0), st.floats(-50, 50), st.floats(-50, 50))
def test_power_cost_is_symmetric_and_nonnegative(p, a, b):
    spec = CostSpec.power(p, 2)
    c1 = evaluate_cost(spec, (a, b), (0, 0))
    c2 = evaluate_cost(spec, (0, 0), (a, b))
    assert c1 >= 0 and c1 == c2
