import math

import numpy as np
import pytest
from scipy.linalg import expm

from ssmkit import IntegratorConfig, integrate
from ssmkit.errors import StepBudgetError, StepUnderflowError


def test_zero_field_returns_input_exactly():
    x0 = np.array([1.5, -2.0, 7.0])
    x1, steps = integrate(lambda x, t: np.zeros_like(x), x0, 0.0, 3.0)
    assert np.array_equal(x1, x0)
    assert steps >= 1


def test_zero_span_is_identity_with_no_steps():
    x0 = np.array([2.0])
    x1, steps = integrate(lambda x, t: -x, x0, 1.0, 1.0)
    assert np.array_equal(x1, x0)
    assert steps == 0


def test_exponential_decay_matches_closed_form():
    cfg = IntegratorConfig(rtol=1e-8, atol=1e-10)
    x1, _ = integrate(lambda x, t: -x, np.array([1.0]), 0.0, 1.0, cfg)
    assert x1[0] == pytest.approx(math.exp(-1.0), rel=1e-8)


def test_rotation_returns_to_start_after_full_period():
    a = np.array([[0.0, 1.0], [-1.0, 0.0]])
    # the matrix exponential over 2*pi is the identity
    assert np.allclose(expm(a * 2 * np.pi), np.eye(2), atol=1e-12)
    cfg = IntegratorConfig(rtol=1e-9, atol=1e-9)
    x0 = np.array([1.0, 0.0])
    x1, _ = integrate(lambda x, t: a @ x, x0, 0.0, 2 * np.pi, cfg)
    assert np.allclose(x1, x0, atol=1e-6)


def test_tolerance_monotonicity_on_exponential():
    errors = []
    for rtol in (1e-4, 5e-5, 2.5e-5, 1.25e-5, 1e-6, 1e-8):
        cfg = IntegratorConfig(rtol=rtol, atol=1e-14)
        x1, _ = integrate(lambda x, t: -x, np.array([1.0]), 0.0, 1.0, cfg)
        errors.append(abs(x1[0] - math.exp(-1.0)))
    for tighter, looser in zip(errors[1:], errors[:-1]):
        assert tighter <= looser + 1e-15


@pytest.mark.parametrize("rtol", [1e-4, 1e-6, 1e-8])
def test_global_error_within_hundred_rtol(rtol):
    cfg = IntegratorConfig(rtol=rtol, atol=1e-14)
    x1, _ = integrate(lambda x, t: -x, np.array([1.0]), 0.0, 1.0, cfg)
    assert abs(x1[0] - math.exp(-1.0)) <= 100.0 * rtol


def test_step_budget_error():
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-12, max_steps=3)
    with pytest.raises(StepBudgetError):
        integrate(lambda x, t: np.array([math.cos(40.0 * t) * 40.0]), np.array([0.0]), 0.0, 50.0, cfg)


def test_step_underflow_error():
    # gradient explodes near t = 1: forces ever smaller steps
    def f(x, t):
        return np.array([1.0 / max(1.0 - t, 1e-300) ** 2])

    cfg = IntegratorConfig(rtol=1e-8, atol=1e-10, h_min=1e-6, max_steps=10_000_000)
    with pytest.raises((StepUnderflowError, StepBudgetError)):
        integrate(f, np.array([0.0]), 0.0, 1.0, cfg)


def test_landing_is_exact():
    seen = []

    def f(x, t):
        seen.append(t)
        return -x

    x1, _ = integrate(f, np.array([1.0]), 0.0, 0.7321)
    assert max(seen) <= 0.7321 + 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rtol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(max_steps=0)
