"""Continuous-discrete extended Kalman filter.

The prediction phase propagates the mean and covariance jointly as one
packed ODE (mean first, then the upper triangle of the covariance,
row-major), solved by the adaptive integrator. The update phase is the
discrete Gaussian measurement update in Joseph form. The filter returns a
deterministic approximation of the data log-likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DivergenceError,
    LengthMismatchError,
    SingularInnovationError,
    StepBudgetError,
    StepUnderflowError,
)
from .integrate import IntegratorConfig, integrate_with_h

_LOG_2PI = float(np.log(2.0 * np.pi))

_TRIU_CACHE = {}


def _triu(k):
    if k not in _TRIU_CACHE:
        _TRIU_CACHE[k] = np.triu_indices(k)
    return _TRIU_CACHE[k]


@dataclass
class GaussianBelief:
    """Gaussian state estimate: mean, covariance and current time."""

    mean: np.ndarray
    cov: np.ndarray
    time: float

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        k = self.mean.size
        if self.cov.shape != (k, k):
            raise LengthMismatchError(f"covariance shape {self.cov.shape} does not match k={k}")

    @property
    def k(self):
        return self.mean.size

    def copy(self):
        return GaussianBelief(self.mean.copy(), self.cov.copy(), self.time)


@dataclass
class FrameRecord:
    time: float
    stream: str
    pred_mean: float
    pred_var: float
    innovation: float
    loglik_inc: float


@dataclass
class FilterOutput:
    loglik: float
    records: list
    diverged: bool
    beliefs: list  # (time, mean, cov) after the updates at each time


def packed_dim(k):
    """Length of the packed moment vector: k for the mean plus k(k+1)/2."""
    return k * (k + 1) // 2 + k


def pack(belief):
    """Mean followed by the upper-triangular covariance entries, row-major."""
    k = belief.k
    iu = _triu(k)
    out = np.empty(packed_dim(k))
    out[:k] = belief.mean
    out[k:] = belief.cov[iu]
    return out


def unpack(vector, k, time=0.0):
    vector = np.asarray(vector, dtype=float)
    if vector.size != packed_dim(k):
        raise LengthMismatchError(f"expected packed length {packed_dim(k)} for k={k}, got {vector.size}")
    iu = _triu(k)
    cov = np.zeros((k, k))
    cov[iu] = vector[k:]
    cov.T[iu] = vector[k:]
    return GaussianBelief(vector[:k].copy(), cov, time)


def stabilize(cov):
    """Symmetrise and floor the spectrum at 1e-12 * trace / k."""
    cov = np.asarray(cov, dtype=float)
    sym = 0.5 * (cov + cov.T)
    w, v = np.linalg.eigh(sym)
    floor = max(1e-12 * np.trace(sym) / sym.shape[0], 0.0)
    if w[0] >= floor:
        return sym
    w = np.maximum(w, floor)
    return (v * w) @ v.T


def predict(belief, model, theta, t_next, config=IntegratorConfig()):
    """Propagate the belief to t_next through the packed moment ODE."""
    theta_nat = model.params.to_natural(theta)
    new, _ = _predict_nat(belief, model, theta_nat, t_next, config)
    return new


def _predict_nat(belief, model, theta_nat, t_next, config, h_start=None):
    if t_next < belief.time:
        raise ValueError("t_next must be >= belief.time")
    if t_next == belief.time:
        return belief.copy(), h_start
    k = belief.k
    iu = _triu(k)
    p_buf = np.zeros((k, k))
    out_buf = np.empty(packed_dim(k))

    def rhs(y, t):
        m = y[:k]
        p_buf[iu] = y[k:]
        p_buf.T[iu] = y[k:]
        fp = model.drift_jacobian(m, theta_nat, t) @ p_buf
        dp = fp + fp.T + model.diffusion(m, theta_nat, t)
        out_buf[:k] = model.drift(m, theta_nat, t)
        out_buf[k:] = dp[iu]
        return out_buf

    y1, _, h_last = integrate_with_h(rhs, pack(belief), belief.time, t_next, config, h_start)
    return unpack(y1, k, t_next), h_last


def update(belief, stream, value):
    """Condition the belief on one observed frame.

    Returns the updated belief and the Gaussian log-likelihood increment.
    For incidence streams the accumulator slots read by the stream are
    reset to zero afterwards (means and covariance rows/columns).
    """
    new, inc, _ = _measurement_update(belief, stream, value)
    if stream.kind == "incidence":
        _reset_slots(new, list(stream.indices))
    return new, inc


def _measurement_update(belief, stream, value):
    mean, cov = belief.mean, belief.cov
    idx = list(stream.indices)
    e = float(mean[idx].sum())
    pht = cov[:, idx].sum(axis=1)
    v = float(stream.variance(e))
    s = float(pht[idx].sum() + v)
    if s <= 0.0:
        raise SingularInnovationError(f"stream {stream.name!r}: innovation variance {s} <= 0")
    nu = float(value) - e
    gain = pht / s
    new_mean = mean + gain * nu
    ikh = np.eye(belief.k)
    ikh[:, idx] -= gain[:, None]
    new_cov = ikh @ cov @ ikh.T + v * np.outer(gain, gain)
    inc = -0.5 * (_LOG_2PI + np.log(s) + nu * nu / s)
    record = FrameRecord(belief.time, stream.name, e, s, nu, inc)
    return GaussianBelief(new_mean, new_cov, belief.time), inc, record


def _reset_slots(belief, slots):
    belief.mean[slots] = 0.0
    belief.cov[slots, :] = 0.0
    belief.cov[:, slots] = 0.0


def run_ekf(model, theta, series, config=IntegratorConfig()):
    """Filter a whole observation series.

    Missing frames advance the prediction only. Numeric failures are
    reported through the ``diverged`` flag with loglik -inf rather than
    raised, so optimisers and samplers can treat them as rejections.
    """
    records = []
    beliefs = []
    loglik = 0.0
    try:
        theta_nat = model.params.to_natural(theta)
        x0, p0 = model.init(theta_nat)
        belief = GaussianBelief(np.asarray(x0, dtype=float), stabilize(p0), model.t0)
        h_hint = None
        for t, frames in series.by_time():
            belief, h_hint = _predict_nat(belief, model, theta_nat, t, config, h_hint)
            updated = False
            reset_idx = set()
            for fr in frames:
                stream = model.stream(fr.stream)
                if stream.kind == "incidence":
                    reset_idx.update(stream.indices)
                if fr.missing:
                    continue
                belief, inc, record = _measurement_update(belief, stream, fr.value)
                records.append(record)
                loglik += inc
                updated = True
            if updated:
                belief.cov = stabilize(belief.cov)
            if reset_idx:
                _reset_slots(belief, sorted(reset_idx))
            if not (np.all(np.isfinite(belief.mean)) and np.all(np.isfinite(belief.cov))):
                raise DivergenceError(f"belief became non-finite at t={t:.6g}")
            beliefs.append((t, belief.mean.copy(), belief.cov.copy()))
    except (
        DivergenceError,
        StepUnderflowError,
        StepBudgetError,
        SingularInnovationError,
        np.linalg.LinAlgError,
        FloatingPointError,
        OverflowError,
    ):
        return FilterOutput(-np.inf, records, True, beliefs)
    if not np.isfinite(loglik):
        return FilterOutput(-np.inf, records, True, beliefs)
    return FilterOutput(float(loglik), records, False, beliefs)
