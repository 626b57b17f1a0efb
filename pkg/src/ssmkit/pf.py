"""Bootstrap particle filter with systematic resampling.

The per-frame mean weight gives an unbiased estimate of the likelihood,
accumulated in log space. Noise for particle slot j always comes from row
j of counter-keyed Philox blocks, so the output is a function of the
inputs and the seed alone, independent of the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BadWeightsError
from .model import default_em_dt, diffusion_factor, em_substeps

_PROPAGATE_TAG = 1
_RESAMPLE_TAG = 2
_INIT_TAG = 3


def _keyed_generator(seed, tag):
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(tag)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class SlotStreams:
    """Per-slot noise streams backed by one counter-based generator.

    Blocks of shape (n, J, k) are materialised in a fixed order; slot j
    consumes row j of every block. Draws therefore depend only on the
    seed, the draw position and the slot index.
    """

    def __init__(self, seed, n_slots):
        self.seed = seed
        self.n_slots = n_slots
        self._gen = _keyed_generator(seed, _PROPAGATE_TAG)

    def normal_block(self, n, k):
        return self._gen.standard_normal((n, self.n_slots, k))


@dataclass
class ParticleEnsemble:
    """Weighted particle cloud with per-slot noise streams."""

    states: np.ndarray  # (J, k)
    log_weights: np.ndarray  # (J,), equal after every resampling pass
    time: float
    streams: SlotStreams

    @property
    def n_particles(self):
        return self.states.shape[0]

    def normalized_weights(self):
        lw = self.log_weights - self.log_weights.max()
        w = np.exp(lw)
        return w / w.sum()


@dataclass
class PfOutput:
    loglik: float
    times: np.ndarray
    weight_ess: np.ndarray
    loglik_incs: np.ndarray
    degenerate: bool


def systematic_resample(weights, u):
    """Offspring indices on the systematic grid (u + j) / J, sorted ascending."""
    weights = np.asarray(weights, dtype=float)
    n = weights.size
    if n < 1:
        raise BadWeightsError("need at least one weight")
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    if np.any(weights < 0):
        raise BadWeightsError("negative weight")
    total = weights.sum()
    if abs(total - 1.0) > 1e-9:
        raise BadWeightsError(f"weights sum to {total!r}, expected 1")
    positions = (u + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="right")


def make_ensemble(model, theta, n_particles, seed):
    """Initial ensemble at the model's start time."""
    theta_nat = model.params.to_natural(theta)
    x0, p0 = model.init(theta_nat)
    states = np.repeat(np.asarray(x0, dtype=float)[None, :], n_particles, axis=0)
    p0 = np.asarray(p0, dtype=float)
    if np.any(p0 != 0.0):
        z = _keyed_generator(seed, _INIT_TAG).standard_normal((n_particles, model.k))
        states = states + z @ diffusion_factor(p0).T
    log_weights = np.full(n_particles, -np.log(n_particles))
    return ParticleEnsemble(states, log_weights, model.t0, SlotStreams(seed, n_particles))


def propagate(ensemble, model, theta, t_next, dt, workers=1):
    """Advance every particle to t_next by Euler-Maruyama substeps."""
    theta_nat = model.params.to_natural(theta)
    states = _propagate_states(ensemble, model, theta_nat, t_next, dt, workers)
    return ParticleEnsemble(states, ensemble.log_weights.copy(), t_next, ensemble.streams)


def _propagate_states(ensemble, model, theta_nat, t_next, dt, workers):
    if t_next < ensemble.time:
        raise ValueError("t_next must be >= ensemble time")
    states = ensemble.states.copy()
    steps = em_substeps(ensemble.time, t_next, dt)
    if steps.size == 0:
        return states
    noise = ensemble.streams.normal_block(steps.size, model.k)
    t = ensemble.time
    for s, h in enumerate(steps):
        # Models with state-independent noise may return one shared (k, k)
        # intensity; diffusion_factor then stays 2-D.
        q = np.asarray(model.diffusion(states, theta_nat, t), dtype=float)
        factor = diffusion_factor(q * h)
        z = noise[s]

        def _noise_term(rows=slice(None)):
            if factor.ndim == 2:
                return z[rows] @ factor.T
            return np.einsum("jab,jb->ja", factor[rows], z[rows])

        if workers > 1:
            chunks = np.array_split(np.arange(states.shape[0]), workers)

            def _step(rows):
                f = np.asarray(model.drift(states[rows], theta_nat, t), dtype=float)
                return states[rows] + f * h + _noise_term(rows)

            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_step, chunks))
            states = np.concatenate(parts, axis=0)
        else:
            f = np.asarray(model.drift(states, theta_nat, t), dtype=float)
            states = states + f * h + _noise_term()
        t += h
    return states


def run_pf(model, theta, series, n_particles=1000, dt=None, seed=0, workers=1):
    """Bootstrap filter over a whole observation series.

    At every time with at least one non-missing frame the particles are
    weighted by the observation density, the log-mean weight is added to
    the likelihood estimate, and the cloud is systematically resampled.
    Missing frames propagate only. Incidence accumulators are reset after
    the weighting at their scheduled times.
    """
    if n_particles < 2:
        raise ValueError("need at least two particles")
    theta_nat = model.params.to_natural(theta)
    if dt is None:
        dt = default_em_dt(model)
    ens = make_ensemble(model, theta, n_particles, seed)
    resample_gen = _keyed_generator(seed, _RESAMPLE_TAG)

    loglik = 0.0
    times, ess_list, inc_list = [], [], []
    for t, frames in series.by_time():
        ens.states = _propagate_states(ens, model, theta_nat, t, dt, workers)
        ens.time = t

        bad = ~np.all(np.isfinite(ens.states), axis=-1)
        logw = np.zeros(n_particles)
        observed = False
        reset_idx = set()
        for fr in frames:
            stream = model.stream(fr.stream)
            if stream.kind == "incidence":
                reset_idx.update(stream.indices)
            if fr.missing:
                continue
            observed = True
            with np.errstate(invalid="ignore", over="ignore"):
                logw += stream.loglik(fr.value, stream.expected(ens.states))
        if observed:
            logw[bad] = -np.inf
            logw = np.where(np.isnan(logw), -np.inf, logw)
            m = logw.max()
            if not np.isfinite(m):
                return PfOutput(-np.inf, np.array(times), np.array(ess_list), np.array(inc_list), True)
            shifted = np.exp(logw - m)
            total = shifted.sum()
            inc = m + np.log(total / n_particles)
            loglik += inc
            w = shifted / total
            idx = systematic_resample(w, resample_gen.random())
            ens.states = ens.states[idx]
            ens.log_weights = np.full(n_particles, -np.log(n_particles))
            times.append(t)
            ess_list.append(1.0 / float(w @ w))
            inc_list.append(inc)
        if reset_idx:
            ens.states[:, sorted(reset_idx)] = 0.0

    return PfOutput(float(loglik), np.array(times), np.array(ess_list), np.array(inc_list), False)
