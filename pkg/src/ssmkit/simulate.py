"""Synthetic-data generation by Euler-Maruyama simulation of the model."""

from __future__ import annotations

import numpy as np

from .errors import DivergenceError
from .model import (
    Frame,
    LatentPath,
    ObservationSeries,
    default_em_dt,
    diffusion_factor,
    em_substeps,
)


def simulate(model, theta, seed, *, dt=None, missing=None):
    """Simulate one latent trajectory and noisy observations.

    Parameters
    ----------
    model : ModelDef
    theta : array
        Parameter vector on the transformed scale.
    seed : int
        Seeds both the latent noise and the observation noise.
    dt : float, optional
        Euler-Maruyama step; defaults to a tenth of the smallest gap
        between observation times.
    missing : dict, optional
        Stream name -> iterable of times whose reports are blanked out.

    Returns
    -------
    (ObservationSeries, LatentPath)
    """
    theta_nat = model.params.to_natural(theta)
    if dt is None:
        dt = default_em_dt(model)
    if dt <= 0:
        raise ValueError("dt must be > 0")
    missing = {name: set(np.asarray(ts, dtype=float).tolist()) for name, ts in (missing or {}).items()}

    rng = np.random.default_rng(seed)
    x0, p0 = model.init(theta_nat)
    x = np.asarray(x0, dtype=float).copy()
    p0 = np.asarray(p0, dtype=float)
    if np.any(p0 != 0.0):
        x = x + diffusion_factor(p0) @ rng.standard_normal(model.k)

    t = model.t0
    times = [t]
    states = [x.copy()]
    frames = []

    for t_obs in model.observation_times():
        for h in em_substeps(t, t_obs, dt):
            f = np.asarray(model.drift(x, theta_nat, t), dtype=float)
            q = np.asarray(model.diffusion(x, theta_nat, t), dtype=float)
            noise = diffusion_factor(q * h) @ rng.standard_normal(model.k)
            x = x + f * h + noise
            t = t + h
            if not np.all(np.isfinite(x)):
                raise DivergenceError(f"simulated state diverged at t={t:.6g}")
            times.append(t)
            states.append(x.copy())
        t = t_obs

        for stream in model.streams:
            if not np.any(np.isclose(stream.times, t_obs, rtol=0.0, atol=1e-9)):
                continue
            if _is_masked(missing.get(stream.name), t_obs):
                frames.append(Frame(t_obs, stream.name, None))
                continue
            e = float(stream.expected(x))
            value = e + np.sqrt(float(stream.variance(e))) * rng.standard_normal()
            frames.append(Frame(t_obs, stream.name, float(value)))

        slots = model.reset_slots(t_obs)
        if slots:
            x[slots] = 0.0
            times.append(t_obs)
            states.append(x.copy())

    series = ObservationSeries(frames)
    path = LatentPath(np.array(times), np.array(states), tuple(model.state_names))
    return series, path


def _is_masked(masked_times, t):
    if not masked_times:
        return False
    return any(abs(t - m) <= 1e-9 for m in masked_times)
