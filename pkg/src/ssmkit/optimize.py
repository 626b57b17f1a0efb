"""Derivative-free likelihood maximisation.

Latin hypercube screening locates promising regions of the transformed
parameter space with cheap filter evaluations; a Nelder-Mead simplex then
polishes the best point. Two objective flavours exist: the filter
likelihood of the full stochastic model, and the same with the process
noise removed (a pure ODE fit).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ekf import IntegratorConfig, run_ekf
from .errors import DegenerateSimplexError, UnboundedDimensionError
from .model import deterministic_collapse


@dataclass(frozen=True)
class LhsDesign:
    """m stratified points in a d-dimensional box, one per stratum per axis."""

    points: np.ndarray  # (m, d)
    bounds: tuple  # per-dimension (lo, hi)

    @property
    def m(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]


def lhs_sample(params, m, seed):
    """Latin hypercube over the transformed prior bounds.

    Each dimension gets an independent random permutation of the m equal
    strata plus uniform jitter inside each stratum.
    """
    if m < 2:
        raise ValueError("need at least two points")
    bounds = params.transformed_bounds()
    for spec, (lo, hi) in zip(params.specs, bounds):
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise UnboundedDimensionError(f"parameter {spec.name!r} has an infinite transformed range")
    rng = np.random.default_rng(seed)
    d = len(bounds)
    points = np.empty((m, d))
    for j, (lo, hi) in enumerate(bounds):
        strata = rng.permutation(m)
        points[:, j] = lo + (strata + rng.random(m)) * (hi - lo) / m
    return LhsDesign(points, tuple(bounds))


def lhs_screen(model, series, design, workers=1, integrator=IntegratorConfig()):
    """Filter likelihood at every design point, ranked best first.

    Diverged points score -inf and sort last. Ties break on the design
    index, so the ranking does not depend on the worker count.
    """

    def evaluate(idx):
        return idx, run_ekf(model, design.points[idx], series, integrator).loglik

    indices = range(design.m)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, indices))
    else:
        results = [evaluate(i) for i in indices]
    results.sort(key=lambda item: (-item[1], item[0]))
    return [(idx, design.points[idx].copy(), ll) for idx, ll in results]


@dataclass
class OptResult:
    theta: np.ndarray
    value: float
    evals: int
    converged: bool


def nelder_mead(objective, theta_init, step_init, tol_f=1e-8, tol_x=1e-8, max_evals=2000):
    """Maximise a black-box objective with the classic simplex moves.

    Reflection 1.0, expansion 2.0, contractions 0.5, shrink 0.5. The
    initial simplex is theta_init plus one step along each coordinate.
    Terminates when the spread of vertex values drops below tol_f, the
    simplex diameter drops below tol_x, or the evaluation budget runs out.
    """
    x0 = np.asarray(theta_init, dtype=float)
    d = x0.size
    steps = np.broadcast_to(np.asarray(step_init, dtype=float), (d,))
    if np.any(steps == 0.0):
        raise DegenerateSimplexError("step_init contains zeros; initial simplex is degenerate")

    verts = np.repeat(x0[None, :], d + 1, axis=0)
    for j in range(d):
        verts[j + 1, j] += steps[j]
    vals = np.array([objective(v) for v in verts])
    evals = d + 1
    best_x, best_f = None, -np.inf

    def note(x, f):
        nonlocal best_x, best_f
        if f > best_f:
            best_x, best_f = x.copy(), f

    for v, f in zip(verts, vals):
        note(v, f)
    if np.all(vals == -np.inf):
        raise DegenerateSimplexError("objective is -inf on the whole initial simplex")

    while True:
        order = np.argsort(-vals, kind="stable")
        verts, vals = verts[order], vals[order]
        spread = vals[0] - vals[-1]
        diameter = np.max(np.abs(verts - verts[0]))
        if spread < tol_f or diameter < tol_x:
            return OptResult(best_x, best_f, evals, True)
        if evals >= max_evals:
            return OptResult(best_x, best_f, evals, False)

        centroid = verts[:-1].mean(axis=0)
        worst = verts[-1]
        xr = centroid + (centroid - worst)
        fr = objective(xr)
        evals += 1
        note(xr, fr)

        if fr > vals[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = objective(xe)
            evals += 1
            note(xe, fe)
            if fe > fr:
                verts[-1], vals[-1] = xe, fe
            else:
                verts[-1], vals[-1] = xr, fr
        elif fr > vals[-2]:
            verts[-1], vals[-1] = xr, fr
        else:
            if fr > vals[-1]:
                xc = centroid + 0.5 * (centroid - worst)
            else:
                xc = centroid - 0.5 * (centroid - worst)
            fc = objective(xc)
            evals += 1
            note(xc, fc)
            if fc > max(fr, vals[-1]):
                verts[-1], vals[-1] = xc, fc
            else:
                for i in range(1, d + 1):
                    verts[i] = verts[0] + 0.5 * (verts[i] - verts[0])
                    vals[i] = objective(verts[i])
                    note(verts[i], vals[i])
                evals += d


def ksimplex(
    model,
    series,
    theta_init,
    *,
    step_init=None,
    tol_f=1e-6,
    tol_x=1e-8,
    max_evals=2000,
    include_prior=True,
    integrator=IntegratorConfig(),
):
    """Simplex search over the stochastic-model filter objective."""
    return _simplex_common(model, series, theta_init, step_init, tol_f, tol_x, max_evals, include_prior, integrator)


def simplex(
    model,
    series,
    theta_init,
    *,
    step_init=None,
    tol_f=1e-6,
    tol_x=1e-8,
    max_evals=2000,
    include_prior=True,
    integrator=IntegratorConfig(),
):
    """Simplex search with the process noise removed (deterministic fit)."""
    collapsed = deterministic_collapse(model)
    return _simplex_common(collapsed, series, theta_init, step_init, tol_f, tol_x, max_evals, include_prior, integrator)


def _simplex_common(model, series, theta_init, step_init, tol_f, tol_x, max_evals, include_prior, integrator):
    if step_init is None:
        step_init = np.array([s.sd_transf for s in model.params.specs])

    def objective(theta):
        lp = model.params.log_prior(theta) if include_prior else 0.0
        if lp == -np.inf:
            return -np.inf
        return run_ekf(model, theta, series, integrator).loglik + lp

    return nelder_mead(objective, theta_init, step_init, tol_f, tol_x, max_evals)
