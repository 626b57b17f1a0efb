"""State-space model abstraction: dynamics, observation streams, data frames.

A model is a drift field plus a process-noise intensity over a state vector
of dimension k, observed through named streams. Streams read either an
instantaneous compartment (prevalence) or accumulator slots that integrate
a flow between reporting times and are reset to zero after each scheduled
observation time (incidence).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .params import ParameterSet

_LOG_2PI = float(np.log(2.0 * np.pi))

MISSING = None


@dataclass(frozen=True)
class ObservationStream:
    """One observation channel.

    ``indices`` are the state slots whose sum forms the expected value.
    The noise is Gaussian with variance (tau * expected)^2 + sigma_min^2,
    floored away from zero so filter updates stay well defined.
    """

    name: str
    kind: str  # "prevalence" or "incidence"
    indices: tuple[int, ...]
    tau: float
    sigma_min: float
    times: np.ndarray

    def __post_init__(self):
        if self.kind not in ("prevalence", "incidence"):
            raise ValueError(f"stream {self.name!r}: unknown kind {self.kind!r}")
        if self.sigma_min <= 0:
            raise ValueError(f"stream {self.name!r}: sigma_min must be > 0")
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))

    def expected(self, state):
        state = np.asarray(state, dtype=float)
        return state[..., list(self.indices)].sum(axis=-1)

    def variance(self, expected):
        return (self.tau * np.asarray(expected)) ** 2 + self.sigma_min**2

    def loglik(self, value, expected):
        v = self.variance(expected)
        resid = value - expected
        return -0.5 * (_LOG_2PI + np.log(v) + resid * resid / v)

    def jacobian_row(self, k):
        row = np.zeros(k)
        row[list(self.indices)] = 1.0
        return row


@dataclass(frozen=True)
class Frame:
    time: float
    stream: str
    value: Optional[float]  # None marks a missing report

    @property
    def missing(self):
        return self.value is None


class ObservationSeries:
    """Time-ordered observation frames across named streams."""

    def __init__(self, frames):
        frames = sorted(frames, key=lambda fr: fr.time)
        self.frames = frames
        times = []
        groups = []
        for fr in frames:
            if times and fr.time == times[-1]:
                groups[-1].append(fr)
            else:
                times.append(fr.time)
                groups.append([fr])
        self._times = np.array(times)
        self._groups = groups

    @property
    def n(self):
        """Number of non-missing frames."""
        return sum(1 for fr in self.frames if not fr.missing)

    def __len__(self):
        return len(self.frames)

    def by_time(self):
        """Iterate (time, frames-at-that-time) in increasing time order."""
        return zip(self._times, self._groups)

    def stream_names(self):
        return {fr.stream for fr in self.frames}

    def validate(self, model):
        known = {s.name for s in model.streams}
        unknown = self.stream_names() - known
        if unknown:
            raise ValueError(f"series references unknown streams: {sorted(unknown)}")

    def truncated(self, max_time):
        return ObservationSeries([fr for fr in self.frames if fr.time <= max_time])


@dataclass(frozen=True)
class LatentPath:
    """Ground-truth trajectory recorded at simulation resolution."""

    times: np.ndarray
    states: np.ndarray  # (len(times), k)
    names: tuple[str, ...]


@dataclass(frozen=True)
class ModelDef:
    """Markovian state-space model over a k-dimensional state.

    ``drift`` and ``diffusion`` are vectorised over leading axes: states of
    shape (k,) or (J, k) give outputs of shape (k,) / (J, k) and
    (k, k) / (J, k, k) respectively. Both must stay free of shared mutable
    state so evaluations can run concurrently.

    ``init`` maps a natural-scale parameter vector to the initial mean and
    covariance. ``jacobian``, when given, returns the k x k derivative of
    the drift at a single state; otherwise central finite differences with
    step fd_step * (1 + |x|) are used.
    """

    k: int
    state_names: tuple[str, ...]
    params: ParameterSet
    drift: Callable
    diffusion: Callable
    init: Callable
    streams: tuple[ObservationStream, ...]
    accumulator_indices: tuple[int, ...] = ()
    t0: float = 0.0
    jacobian: Optional[Callable] = None
    fd_step: float = 1e-6

    def stream(self, name):
        for s in self.streams:
            if s.name == name:
                return s
        raise KeyError(f"unknown stream {name!r}")

    def drift_jacobian(self, x, theta_nat, t):
        if self.jacobian is not None:
            return np.asarray(self.jacobian(x, theta_nat, t), dtype=float)
        return _fd_jacobian(self.drift, x, theta_nat, t, self.fd_step)

    def reset_slots(self, time):
        """Accumulator slots due for a reset after observations at ``time``."""
        slots = []
        for s in self.streams:
            if s.kind != "incidence":
                continue
            if np.any(np.isclose(s.times, time, rtol=0.0, atol=1e-9)):
                slots.extend(s.indices)
        return sorted(set(slots))

    def observation_times(self):
        times = np.concatenate([s.times for s in self.streams]) if self.streams else np.array([])
        return np.unique(times)


def _fd_jacobian(drift, x, theta_nat, t, fd_step):
    """Central finite differences, one batched drift call for all columns."""
    x = np.asarray(x, dtype=float)
    k = x.size
    h = fd_step * (1.0 + np.abs(x))
    pts = np.repeat(x[None, :], 2 * k, axis=0)
    idx = np.arange(k)
    pts[:k, idx] += h
    pts[k:, idx] -= h
    f = np.asarray(drift(pts, theta_nat, t), dtype=float)
    return (f[:k] - f[k:]).T / (2.0 * h)


def deterministic_collapse(model):
    """Copy of the model with the process noise removed (Q identically 0)."""
    k = model.k

    def zero_q(x, theta_nat, t):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return np.zeros((k, k))
        return np.zeros(x.shape[:-1] + (k, k))

    return replace(model, diffusion=zero_q)


def em_substeps(t_from, t_to, dt):
    """Euler-Maruyama step sizes covering [t_from, t_to].

    Full steps of length dt with the final partial step shortened.
    """
    gap = t_to - t_from
    if gap <= 0:
        return np.array([])
    n_full = int(np.floor(gap / dt + 1e-9))
    rem = gap - n_full * dt
    steps = [dt] * n_full
    if rem > 1e-9 * max(dt, 1.0):
        steps.append(rem)
    if not steps:
        steps = [gap]
    return np.array(steps)


def default_em_dt(model):
    """A tenth of the smallest gap between consecutive observation times."""
    times = model.observation_times()
    if times.size == 0:
        raise ValueError("model declares no observation times")
    t_all = np.concatenate([[model.t0], times])
    gaps = np.diff(np.unique(t_all))
    gaps = gaps[gaps > 0]
    if gaps.size == 0:
        raise ValueError("no positive gaps between observation times")
    return float(gaps.min() / 10.0)


def diffusion_factor(q):
    """Square root factor B with B B^T = Q, batched over leading axes.

    Diagonal Q takes a cheap elementwise path; general PSD matrices go
    through an eigendecomposition with negative eigenvalues clipped.
    """
    q = np.asarray(q, dtype=float)
    k = q.shape[-1]
    off = q - q * np.eye(k)
    if np.all(off == 0.0):
        return np.sqrt(np.clip(np.einsum("...ii->...i", q), 0.0, None))[..., :, None] * np.eye(k)
    w, v = np.linalg.eigh(q)
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)[..., None, :] @ np.swapaxes(v, -1, -2)
