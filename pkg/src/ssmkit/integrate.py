"""Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4) pair).

Shared by the deterministic mean propagation and the filter moment
equations. Step control follows the usual embedded-pair recipe: a scaled
RMS error norm, safety factor 0.9 and step growth clipped to [0.2, 5].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, StepBudgetError, StepUnderflowError

# Dormand-Prince 5(4) tableau. E holds the difference between the 5th and
# 4th order weights, used for the embedded error estimate.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_ORDER = 5.0
_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-6
    atol: float = 1e-6
    h_init: float = 0.0  # <= 0 means a tenth of the span
    h_min: float = 1e-12
    max_steps: int = 100_000

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("rtol and atol must be > 0")
        if self.h_min <= 0:
            raise ValueError("h_min must be > 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


def integrate(f, x0, t0, t1, config=IntegratorConfig()):
    """Integrate dx/dt = f(x, t) from t0 to t1 with adaptive steps.

    Returns the state at t1 (landed on exactly) and the number of accepted
    steps. Raises StepUnderflowError, StepBudgetError or DivergenceError
    on failures.
    """
    x, steps, _ = integrate_with_h(f, x0, t0, t1, config)
    return x, steps


def integrate_with_h(f, x0, t0, t1, config=IntegratorConfig(), h_start=None):
    """Like integrate, but also returns the last accepted step size.

    ``h_start`` seeds the step-size controller, which lets repeated calls
    over consecutive spans (as in filtering) skip the warm-up steps.
    """
    x = np.asarray(x0, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise DivergenceError("initial state is not finite")
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if t1 == t0:
        return x, 0, h_start

    span = t1 - t0
    if h_start is not None and h_start > 0:
        h = h_start
    else:
        h = config.h_init if config.h_init > 0 else 0.1 * span
    h = min(h, span)
    t = t0
    accepted = 0
    attempts = 0
    k = np.empty((7, x.size))

    while t < t1:
        if attempts >= config.max_steps:
            raise StepBudgetError(f"exceeded {config.max_steps} step attempts")
        if h < config.h_min:
            raise StepUnderflowError(f"required step {h:.3e} below h_min at t={t:.6g}")
        last = t + h >= t1
        if last:
            h = t1 - t
        attempts += 1

        k[0] = f(x, t)
        for i in range(1, 7):
            xi = x + h * (_A[i] @ k[:i])
            k[i] = f(xi, t + _C[i] * h)
        if not np.all(np.isfinite(k)):
            raise DivergenceError(f"non-finite derivative at t={t:.6g}")

        x_new = x + h * (_B @ k)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(f"non-finite state at t={t:.6g}")

        err = h * (_E @ k)
        scale = config.atol + config.rtol * np.maximum(np.abs(x), np.abs(x_new))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))

        if err_norm <= 1.0:
            t = t1 if last else t + h
            x = x_new
            accepted += 1
            factor = _FAC_MAX if err_norm == 0.0 else _SAFETY * err_norm ** (-1.0 / _ORDER)
        else:
            factor = _SAFETY * err_norm ** (-1.0 / _ORDER)
        h = h * min(_FAC_MAX, max(_FAC_MIN, factor))

    return x, accepted, h
