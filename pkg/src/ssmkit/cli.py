"""Pipeline command line.

Subcommands mirror the workflow: ``simul`` generates data, ``lhs`` screens
the parameter space with the fast filter, ``simplex``/``ksimplex`` polish
the best point, ``kmcmc`` explores the posterior cheaply, ``pmcmc`` runs
the exact pseudo-marginal sampler from those outputs, ``smc`` evaluates a
single likelihood and ``diag`` turns traces into tables. Every command
prints a one-line JSON summary on stdout and is byte-reproducible under a
fixed seed, independent of the worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .configio import build_model, load_config, read_data, write_data
from .diagnostics import (
    emit_plot_data,
    load_cov,
    save_cov,
    summarize,
    trace_from_csv,
    trace_to_csv,
)
from .ekf import IntegratorConfig, run_ekf
from .errors import SsmkitError
from .mcmc import kmcmc, pmcmc
from .optimize import ksimplex, lhs_sample, lhs_screen, simplex
from .pf import run_pf
from .simulate import simulate
from .twocity import write_example

WORKERS_ENV = "SSMKIT_WORKERS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    parser = _Parser(prog="ssmkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ssmkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, data=True):
        p.add_argument("-c", "--config", default=".", help="directory with process/context/link JSON")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--outdir", default=".", help="where output files go")
        if data:
            p.add_argument("--data", default=None, help="data CSV (default: context entry)")

    def add_integrator(p):
        p.add_argument("--rtol", type=float, default=1e-6)
        p.add_argument("--atol", type=float, default=1e-6)

    def add_workers(p):
        p.add_argument("-P", "--workers", type=int, default=None,
                       help=f"worker count (default: ${WORKERS_ENV} or 1)")

    p = sub.add_parser("simul", help="simulate a synthetic dataset")
    add_common(p)
    p.add_argument("--theta", default=None, help="theta JSON (default: context truth, else guesses)")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--latent", default=None, help="latent path CSV (default: latent.csv)")
    p.add_argument("--no-missing", action="store_true", help="ignore the declared missingness mask")

    p = sub.add_parser("smc", help="one likelihood evaluation with either filter")
    add_common(p)
    p.add_argument("--backend", choices=("pf", "ekf"), default="pf")
    p.add_argument("--theta", default=None)
    p.add_argument("-J", "--particles", type=int, default=1000)
    p.add_argument("--dt", type=float, default=None)
    add_workers(p)
    add_integrator(p)

    p = sub.add_parser("lhs", help="Latin hypercube screening of the parameter space")
    add_common(p)
    p.add_argument("-m", "--points", type=int, required=True)
    add_workers(p)
    add_integrator(p)

    for name, doc in (("simplex", "simplex over the noise-free model"),
                      ("ksimplex", "simplex over the stochastic-model filter objective")):
        p = sub.add_parser(name, help=doc)
        add_common(p)
        p.add_argument("--theta", default=None, help="start point JSON")
        p.add_argument("--from-lhs", default=None, help="take the best row of an lhs_ranked.csv")
        p.add_argument("--tol-f", type=float, default=1e-6)
        p.add_argument("--tol-x", type=float, default=1e-8)
        p.add_argument("--max-evals", type=int, default=2000)
        p.add_argument("--no-prior", action="store_true", help="maximise the bare likelihood")
        add_integrator(p)

    for name, doc in (("kmcmc", "adaptive chain with the fast filter likelihood"),
                      ("pmcmc", "adaptive pseudo-marginal chain with the particle filter")):
        p = sub.add_parser(name, help=doc)
        add_common(p)
        p.add_argument("-M", "--iterations", type=int, required=True)
        p.add_argument("-a", "--cooling", type=float, default=0.999)
        p.add_argument("-S", "--switch", type=int, default=100)
        p.add_argument("--theta0", default=None)
        p.add_argument("--cov0", default=None)
        p.add_argument("--snapshot-every", type=int, default=1000)
        p.add_argument("--no-adapt", action="store_true", help="keep the proposal fixed")
        if name == "pmcmc":
            p.add_argument("-J", "--particles", type=int, default=1000)
            p.add_argument("--dt", type=float, default=None)
            add_workers(p)
        else:
            add_integrator(p)

    p = sub.add_parser("diag", help="ESS, quantiles and plot data from a trace")
    add_common(p, data=False)
    p.add_argument("--trace", required=True)
    p.add_argument("--burn", type=int, default=0)
    p.add_argument("--bins", type=int, default=50)

    p = sub.add_parser("example", help="copy the bundled example declaration files")
    p.add_argument("--outdir", default="two_city_si")

    return parser


def _resolve_workers(args):
    workers = getattr(args, "workers", None)
    if workers is not None:
        return max(1, workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
    return 1


def _load_problem(args, need_data=True):
    process, context, link = load_config(args.config)
    model, params, meta = build_model(process, context, link)
    series = None
    if need_data:
        path = args.data or meta.get("data")
        if path is None:
            raise UsageError("no data file: give --data or a context data entry")
        path = Path(path)
        if not path.is_absolute():
            path = Path(args.config) / path
        if not path.exists():
            raise UsageError(f"data file {path} not found (run simul first?)")
        series = read_data(path)
        series.validate(model)
    return model, params, meta, series


def _load_theta(path, params, default):
    if path is None:
        return np.asarray(default, dtype=float)
    with open(path) as fh:
        doc = json.load(fh)
    if isinstance(doc, list):
        return np.asarray(doc, dtype=float)
    if "theta_transformed" in doc:
        return np.asarray(doc["theta_transformed"], dtype=float)
    if "theta_natural" in doc:
        return params.to_transformed(doc["theta_natural"])
    return params.to_transformed(doc)


def _theta_from_lhs(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        row = next(reader)
    d = len(header) - 3  # rank, index, <params...>, loglik
    return np.asarray([float(v) for v in row[2 : 2 + d]], dtype=float)


def _integrator(args):
    return IntegratorConfig(rtol=args.rtol, atol=args.atol)


def _write_theta_map(path, params, result):
    doc = {
        "theta_transformed": [float(v) for v in result.theta],
        "theta_natural": {n: float(v) for n, v in params.natural_dict(result.theta).items()},
        "objective": float(result.value),
        "evals": int(result.evals),
        "converged": bool(result.converged),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _summary(**kwargs):
    print(json.dumps(kwargs, sort_keys=True))


def _cmd_simul(args):
    model, params, meta, _ = _load_problem(args, need_data=False)
    theta = _load_theta(args.theta, params, _default_theta(params, meta))
    missing = None if args.no_missing else meta.get("missing_times")
    series, path = simulate(model, theta, args.seed, dt=args.dt, missing=missing)

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    data_path = Path(args.data) if args.data else Path(meta.get("data") or "data.csv")
    if not data_path.is_absolute():
        data_path = outdir / data_path
    write_data(series, data_path)
    latent_path = Path(args.latent) if args.latent else outdir / "latent.csv"
    with open(latent_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", *path.names])
        for t, x in zip(path.times, path.states):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in x)])
    _summary(command="simul", seed=args.seed, frames=len(series), n=series.n,
             data=str(data_path), latent=str(latent_path))
    return 0


def _default_theta(params, meta):
    truth = meta.get("truth")
    if truth:
        return params.to_transformed(truth)
    return params.guess_transformed()


def _cmd_smc(args):
    model, params, meta, series = _load_problem(args)
    theta = _load_theta(args.theta, params, params.guess_transformed())
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.backend == "ekf":
        out = run_ekf(model, theta, series, _integrator(args))
        trace_path = outdir / "ekf_trace.csv"
        with open(trace_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "stream", "pred_mean", "pred_var", "innovation", "loglik_inc"])
            for r in out.records:
                w.writerow([repr(r.time), r.stream, repr(r.pred_mean), repr(r.pred_var),
                            repr(r.innovation), repr(r.loglik_inc)])
        _summary(command="smc", backend="ekf", loglik=out.loglik, diverged=out.diverged,
                 trace=str(trace_path), seed=args.seed)
        return 2 if out.diverged else 0
    workers = _resolve_workers(args)
    out = run_pf(model, theta, series, args.particles, args.dt, args.seed, workers)
    diag_path = outdir / "pf_diag.csv"
    with open(diag_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "weight_ess", "loglik_inc"])
        for t, e, i in zip(out.times, out.weight_ess, out.loglik_incs):
            w.writerow([repr(float(t)), repr(float(e)), repr(float(i))])
    _summary(command="smc", backend="pf", loglik=out.loglik, degenerate=out.degenerate,
             particles=args.particles, workers=workers, diag=str(diag_path), seed=args.seed)
    return 2 if out.degenerate else 0


def _cmd_lhs(args):
    model, params, meta, series = _load_problem(args)
    workers = _resolve_workers(args)
    design = lhs_sample(params, args.points, args.seed)
    ranked = lhs_screen(model, series, design, workers, _integrator(args))
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    out_path = outdir / "lhs_ranked.csv"
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "index", *params.names, "loglik"])
        for rank, (idx, theta, ll) in enumerate(ranked):
            w.writerow([rank, idx, *(repr(float(v)) for v in theta), repr(float(ll))])
    best = ranked[0]
    _summary(command="lhs", points=args.points, seed=args.seed, workers=workers,
             best_loglik=best[2], ranked=str(out_path))
    return 0


def _cmd_simplex(args, stochastic):
    model, params, meta, series = _load_problem(args)
    if args.from_lhs:
        theta0 = _theta_from_lhs(args.from_lhs)
    else:
        theta0 = _load_theta(args.theta, params, params.guess_transformed())
    run = ksimplex if stochastic else simplex
    result = run(
        model, series, theta0,
        tol_f=args.tol_f, tol_x=args.tol_x, max_evals=args.max_evals,
        include_prior=not args.no_prior, integrator=_integrator(args),
    )
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    map_path = outdir / "theta_map.json"
    _write_theta_map(map_path, params, result)
    _summary(command="ksimplex" if stochastic else "simplex", objective=result.value,
             evals=result.evals, converged=result.converged, theta_map=str(map_path))
    return 0


def _cmd_mcmc(args, backend):
    model, params, meta, series = _load_problem(args)
    theta0 = _load_theta(args.theta0, params, params.guess_transformed())
    cov0 = load_cov(args.cov0) if args.cov0 else params.default_cov()
    common = dict(
        cooling=args.cooling,
        switch_after=args.switch,
        seed=args.seed,
        snapshot_every=args.snapshot_every,
        adaptive=not args.no_adapt,
    )
    if backend == "ekf":
        trace = kmcmc(model, series, theta0, cov0, args.iterations,
                      integrator=_integrator(args), **common)
        workers = 1
    else:
        workers = _resolve_workers(args)
        trace = pmcmc(model, series, theta0, cov0, args.iterations,
                      n_particles=args.particles, dt=args.dt, workers=workers, **common)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    trace_path = outdir / "trace.csv"
    trace_to_csv(trace, trace_path)
    for it, cov in sorted(trace.snapshots.items()):
        save_cov(cov, outdir / f"cov_{it}.json")
    save_cov(trace.final_cov(), outdir / "cov_final.json")
    _summary(command="kmcmc" if backend == "ekf" else "pmcmc",
             iterations=args.iterations, acceptance=trace.acceptance_rate(),
             final_loglik=float(trace.loglik[-1]), seed=args.seed, workers=workers,
             trace=str(trace_path), cov_final=str(outdir / "cov_final.json"))
    return 0


def _cmd_diag(args):
    process, context, link = load_config(args.config)
    model, params, meta = build_model(process, context, link)
    trace = trace_from_csv(args.trace)
    if list(trace.names) != params.names:
        raise UsageError(
            f"trace parameters {list(trace.names)} do not match the declared model {params.names}"
        )
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = emit_plot_data(trace, outdir, params, burn=args.burn, bins=args.bins)
    info = summarize(trace, params, burn=args.burn)
    table_path = outdir / "diag_params.csv"
    with open(table_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["param", "ess", "q2.5", "q50", "q97.5"])
        for name in trace.names:
            q = info["quantiles"][name]
            w.writerow([name, repr(info["ess"][name]), repr(q["q2.5"]), repr(q["q50"]), repr(q["q97.5"])])
    chain_path = outdir / "diag_chain.csv"
    with open(chain_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iterations", "acceptance", "backend"])
        w.writerow([info["iterations"], repr(info["acceptance"]), info["backend"]])
    _summary(command="diag", acceptance=info["acceptance"],
             files=[str(p) for p in written] + [str(table_path), str(chain_path)])
    return 0


def _cmd_example(args):
    written = write_example(args.outdir)
    _summary(command="example", files=[str(p) for p in written])
    return 0


def dispatch(argv):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simul":
            return _cmd_simul(args)
        if args.command == "smc":
            return _cmd_smc(args)
        if args.command == "lhs":
            return _cmd_lhs(args)
        if args.command == "simplex":
            return _cmd_simplex(args, stochastic=False)
        if args.command == "ksimplex":
            return _cmd_simplex(args, stochastic=True)
        if args.command == "kmcmc":
            return _cmd_mcmc(args, backend="ekf")
        if args.command == "pmcmc":
            return _cmd_mcmc(args, backend="pf")
        if args.command == "diag":
            return _cmd_diag(args)
        if args.command == "example":
            return _cmd_example(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SsmkitError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
