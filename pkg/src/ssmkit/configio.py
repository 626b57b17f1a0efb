"""Model declaration files and data files.

A model is declared in three JSON documents:

``process.json``
    Compartments with initial-value expressions, optional derived
    quantities, flows with rate expressions and their compartment effects,
    parameters diffusing on the log scale, and the estimated parameters.

``context.json``
    Named constants (populations, initial sizes, volatilities), the start
    time and the path of the data file.

``link.json``
    Observation streams: which state quantities they read, their noise
    settings and reporting times.

Rate and initialisation expressions are compiled once and evaluated with
numpy semantics, so they vectorise over particle batches. Data files are
CSV with header ``time,stream,value``; the literal ``NA`` marks a missing
report.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import Frame, ModelDef, ObservationSeries, ObservationStream
from .params import ParameterSet, ParamSpec

_EXPR_GLOBALS = {
    "__builtins__": {},
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
    "minimum": np.minimum,
    "maximum": np.maximum,
    "pi": np.pi,
}


def _compile_expr(expr, allowed, where):
    try:
        code = compile(str(expr), f"<{where}>", "eval")
    except SyntaxError as exc:
        raise ConfigError(f"{where}: cannot parse {expr!r}: {exc}") from exc
    unknown = set(code.co_names) - set(allowed) - set(_EXPR_GLOBALS)
    if unknown:
        raise ConfigError(f"{where}: unknown names {sorted(unknown)} in {expr!r}")
    return code


def load_config(config_dir):
    """Read the three declaration documents from one directory."""
    config_dir = Path(config_dir)
    docs = []
    for name in ("process.json", "context.json", "link.json"):
        path = config_dir / name
        if not path.exists():
            raise ConfigError(f"missing {path}")
        with open(path) as fh:
            docs.append(json.load(fh))
    return tuple(docs)


def parse_times(spec):
    if isinstance(spec, dict):
        start, stop, step = spec["start"], spec["stop"], spec["step"]
        if step <= 0:
            raise ConfigError(f"times: step must be > 0, got {step}")
        return np.arange(start, stop + step / 2, step, dtype=float)
    return np.asarray(spec, dtype=float)


def build_model(process, context, link):
    """Assemble a ModelDef and its ParameterSet from declaration documents."""
    constants = dict(context.get("constants", {}))
    t0 = float(context.get("t0", 0.0))

    specs = []
    for p in process.get("parameters", []):
        try:
            specs.append(
                ParamSpec(
                    name=p["name"],
                    transform=p.get("transform", "identity"),
                    guess=float(p["guess"]),
                    sd_transf=float(p["sd_transf"]),
                    bounds=(float(p["bounds"][0]), float(p["bounds"][1])),
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"parameters: bad entry {p!r}: {exc}") from exc
    params = ParameterSet(specs)

    compartments = [c["name"] for c in process.get("compartments", [])]
    diffusions = process.get("diffusions", [])
    diffusion_names = [d["name"] for d in diffusions]
    accumulators = list(process.get("accumulators", []))

    state_names = (
        compartments
        + [f"log_{name}" for name in diffusion_names]
        + accumulators
    )
    if len(set(state_names)) != len(state_names):
        raise ConfigError("state names are not unique")
    k = len(state_names)
    comp_idx = {name: i for i, name in enumerate(compartments)}
    diff_idx = {name: len(compartments) + i for i, name in enumerate(diffusion_names)}
    acc_idx = {name: len(compartments) + len(diffusions) + i for i, name in enumerate(accumulators)}

    value_names = (
        list(constants) + params.names + compartments + diffusion_names + ["t"]
    )
    derived_items = []
    for name, expr in process.get("derived", {}).items():
        derived_items.append((name, _compile_expr(expr, value_names, f"derived.{name}")))
        value_names.append(name)

    flows = []
    for idx, flow in enumerate(process.get("flows", [])):
        code = _compile_expr(flow["rate"], value_names, f"flows[{idx}].rate")
        effects = []
        for comp, coeff in flow.get("effects", {}).items():
            if comp not in comp_idx:
                raise ConfigError(f"flows[{idx}]: unknown compartment {comp!r}")
            effects.append((comp_idx[comp], float(coeff)))
        acc_slots = []
        for name in flow.get("accumulators", []):
            if name not in acc_idx:
                raise ConfigError(f"flows[{idx}]: unknown accumulator {name!r}")
            acc_slots.append(acc_idx[name])
        flows.append((code, effects, acc_slots))

    const_param_names = list(constants) + params.names
    vol_codes = [
        _compile_expr(d["volatility"], const_param_names, f"diffusions[{i}].volatility")
        for i, d in enumerate(diffusions)
    ]
    diff_init_codes = [
        _compile_expr(d["init"], const_param_names, f"diffusions[{i}].init")
        for i, d in enumerate(diffusions)
    ]
    comp_init_codes = [
        _compile_expr(c["init"], const_param_names, f"compartments[{i}].init")
        for i, c in enumerate(process.get("compartments", []))
    ]

    derived = tuple(derived_items)
    flows = tuple(flows)
    diff_rows = [diff_idx[name] for name in diffusion_names]

    def _base_env(theta_nat, t):
        env = dict(constants)
        env.update(zip(params.names, theta_nat))
        env["t"] = t
        return env

    def drift(x, theta_nat, t):
        x = np.asarray(x, dtype=float)
        env = _base_env(theta_nat, t)
        for name, i in comp_idx.items():
            env[name] = x[..., i]
        for name, i in diff_idx.items():
            env[name] = np.exp(x[..., i])
        for name, code in derived:
            env[name] = eval(code, _EXPR_GLOBALS, env)
        out = np.zeros_like(x)
        for code, effects, acc_slots in flows:
            rate = eval(code, _EXPR_GLOBALS, env)
            for slot, coeff in effects:
                out[..., slot] += coeff * rate
            for slot in acc_slots:
                out[..., slot] += rate
        return out

    def diffusion(x, theta_nat, t):
        # State independent: one (k, k) diagonal shared by any batch.
        env = _base_env(theta_nat, t)
        q = np.zeros((k, k))
        for row, code in zip(diff_rows, vol_codes):
            vol = float(eval(code, _EXPR_GLOBALS, env))
            q[row, row] = vol * vol
        return q

    def init(theta_nat):
        env = _base_env(theta_nat, t0)
        x0 = np.zeros(k)
        for i, code in enumerate(comp_init_codes):
            x0[i] = float(eval(code, _EXPR_GLOBALS, env))
        for row, code in zip(diff_rows, diff_init_codes):
            value = float(eval(code, _EXPR_GLOBALS, env))
            if value <= 0:
                raise ConfigError("diffusion initial value must be > 0 (log scale)")
            x0[row] = np.log(value)
        return x0, np.zeros((k, k))

    readable = {**comp_idx, **diff_idx, **acc_idx}
    streams = []
    for s in link.get("streams", []):
        try:
            indices = tuple(readable[name] for name in s["reads"])
        except KeyError as exc:
            raise ConfigError(f"stream {s.get('name')!r}: unknown state quantity {exc}") from exc
        kind = s["kind"]
        if kind == "incidence" and not all(name in acc_idx for name in s["reads"]):
            raise ConfigError(f"stream {s.get('name')!r}: incidence streams must read accumulators")
        streams.append(
            ObservationStream(
                name=s["name"],
                kind=kind,
                indices=indices,
                tau=float(s["tau"]),
                sigma_min=float(s["sigma_min"]),
                times=parse_times(s["times"]),
            )
        )

    model = ModelDef(
        k=k,
        state_names=tuple(state_names),
        params=params,
        drift=drift,
        diffusion=diffusion,
        init=init,
        streams=tuple(streams),
        accumulator_indices=tuple(acc_idx.values()),
        t0=t0,
    )
    meta = {
        "name": process.get("name", "model"),
        "missing_times": {
            s["name"]: list(map(float, s.get("missing_times", []))) for s in link.get("streams", [])
        },
        "truth": context.get("truth"),
        "data": context.get("data"),
    }
    return model, params, meta


def write_data(series, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "stream", "value"])
        for fr in series.frames:
            value = "NA" if fr.missing else repr(float(fr.value))
            w.writerow([repr(float(fr.time)), fr.stream, value])


def read_data(path):
    frames = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["time", "stream", "value"]:
            raise ConfigError(f"{path}: expected header time,stream,value")
        for row in reader:
            if not row:
                continue
            time, stream, value = row
            frames.append(Frame(float(time), stream, None if value == "NA" else float(value)))
    return ObservationSeries(frames)
