"""Chain diagnostics: effective sample size, relative efficiency, summaries.

Also owns the on-disk trace format shared by the pipeline commands:
``trace.csv`` with one row per iteration and covariance snapshot files as
plain JSON arrays (row-major).
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .mcmc import McmcTrace


def ess(samples):
    """Effective sample size of a scalar chain.

    Autocorrelations use the biased (N-denominator) estimator; the sum is
    truncated at the first lag t where rho_t + rho_{t+1} turns negative
    (initial positive sequence rule). The result is clamped to [1, N].
    A series with zero variance carries one effective sample.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError("need at least 10 samples")
    x = x - x.mean()
    var = float(x @ x) / n
    if var == 0.0:
        return 1.0
    f = np.fft.rfft(np.concatenate([x, np.zeros(n)]))
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    rho = acov / acov[0]
    total = 0.0
    t = 1
    while t + 1 < n:
        if rho[t] + rho[t + 1] < 0.0:
            break
        total += rho[t]
        t += 1
    value = n / (1.0 + 2.0 * total)
    return float(min(max(value, 1.0), n))


def relative_efficiency(trace, trace_opt):
    """Min over components of the ESS ratio against a reference trace."""
    a = _trace_matrix(trace)
    b = _trace_matrix(trace_opt)
    if a.shape != b.shape:
        raise ValueError(f"traces must match in shape, got {a.shape} and {b.shape}")
    ratios = [ess(a[:, j]) / ess(b[:, j]) for j in range(a.shape[1])]
    return float(min(ratios))


def _trace_matrix(trace):
    if isinstance(trace, McmcTrace):
        return trace.thetas
    return np.atleast_2d(np.asarray(trace, dtype=float))


def quantiles(samples, probs=(0.025, 0.5, 0.975)):
    return np.quantile(np.asarray(samples, dtype=float), probs)


def histogram(samples, bins=50):
    """Bin counts over the sample range; a constant series occupies one bin."""
    x = np.asarray(samples, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        edges = np.linspace(lo - 0.5, hi + 0.5, bins + 1)
    else:
        edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(x, bins=edges)
    return edges, counts


def summarize(trace, params=None, burn=0):
    """Per-parameter ESS, quantiles and overall acceptance as one dict.

    When the parameter set is given, quantiles are reported on the
    natural scale; ESS is always computed on the sampling scale.
    """
    thetas = trace.thetas[burn:]
    names = list(trace.names)
    out = {
        "iterations": int(len(trace)),
        "burn": int(burn),
        "acceptance": trace.acceptance_rate(),
        "backend": trace.backend,
        "ess": {},
        "quantiles": {},
    }
    for j, name in enumerate(names):
        out["ess"][name] = ess(thetas[:, j])
        col = thetas[:, j]
        if params is not None:
            col = np.array([params.specs[j].to_natural(v) for v in col])
        q = quantiles(col)
        out["quantiles"][name] = {"q2.5": float(q[0]), "q50": float(q[1]), "q97.5": float(q[2])}
    return out


def emit_plot_data(trace, outdir, params=None, burn=0, bins=50):
    """Write per-parameter traceplot and posterior histogram CSVs.

    Values are on the natural scale when the parameter set is given.
    Returns the list of files written (including ``summary.json``).
    """
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if len(trace) == 0:
        raise ValueError("trace is empty")
    written = []
    for j, name in enumerate(trace.names):
        col = trace.thetas[:, j]
        if params is not None:
            col = np.array([params.specs[j].to_natural(v) for v in col])
        tpath = outdir / f"traceplot_{name}.csv"
        with open(tpath, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "value"])
            for i, v in enumerate(col):
                w.writerow([i, repr(float(v))])
        written.append(tpath)
        edges, counts = histogram(col[burn:], bins)
        ppath = outdir / f"posterior_{name}.csv"
        with open(ppath, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_left", "bin_right", "count"])
            for b in range(counts.size):
                w.writerow([repr(float(edges[b])), repr(float(edges[b + 1])), int(counts[b])])
        written.append(ppath)
    spath = outdir / "summary.json"
    with open(spath, "w") as fh:
        json.dump(summarize(trace, params, burn), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(spath)
    return written


def trace_to_csv(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", *trace.names, "loglik", "logprior", "accepted", "epsilon"])
        for i in range(len(trace)):
            row = [i]
            row.extend(repr(float(v)) for v in trace.thetas[i])
            row.append(repr(float(trace.loglik[i])))
            row.append(repr(float(trace.logprior[i])))
            row.append(int(trace.accepted[i]))
            row.append(repr(float(trace.epsilon[i])))
            w.writerow(row)


def trace_from_csv(path, backend="file"):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = tuple(header[1:-4])
        rows = list(reader)
    m = len(rows)
    d = len(names)
    thetas = np.empty((m, d))
    loglik = np.empty(m)
    logprior = np.empty(m)
    accepted = np.zeros(m, dtype=bool)
    epsilon = np.empty(m)
    for i, row in enumerate(rows):
        thetas[i] = [float(v) for v in row[1 : 1 + d]]
        loglik[i] = float(row[1 + d])
        logprior[i] = float(row[2 + d])
        accepted[i] = row[3 + d] == "1"
        epsilon[i] = float(row[4 + d])
    return McmcTrace(names, thetas, loglik, logprior, accepted, epsilon, {}, backend)


def save_cov(cov, path):
    with open(path, "w") as fh:
        json.dump([[float(v) for v in row] for row in np.asarray(cov)], fh)
        fh.write("\n")


def load_cov(path):
    with open(path) as fh:
        return np.asarray(json.load(fh), dtype=float)
