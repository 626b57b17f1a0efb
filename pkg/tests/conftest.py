import numpy as np
import pytest

from ssmkit import (
    ModelDef,
    ObservationSeries,
    ObservationStream,
    ParamSpec,
    ParameterSet,
    build_two_city_si,
    simulate,
)


def make_linear_model(n_frames=50, obs_gap=1.0, sigma_obs=0.3, p0_scale=1.0):
    """Two-state linear SDE with one linear observation stream.

    The single parameter shifts the first component of the initial mean,
    which makes the model useful both as a pure filtering benchmark and
    as a posterior-inference problem with a tractable reference.
    """
    a = np.array([[-0.5, 0.2], [0.1, -0.3]])
    q = np.diag([0.04, 0.09])
    q.flags.writeable = False
    p0 = p0_scale * np.diag([0.2, 0.1])

    params = ParameterSet(
        [ParamSpec(name="x0_1", transform="identity", guess=1.0, sd_transf=0.1, bounds=(-10.0, 10.0))]
    )

    def drift(x, theta_nat, t):
        return np.asarray(x, dtype=float) @ a.T

    def diffusion(x, theta_nat, t):
        return q

    def jacobian(x, theta_nat, t):
        return a

    def init(theta_nat):
        return np.array([theta_nat[0], -0.5]), p0.copy()

    stream = ObservationStream(
        name="obs0",
        kind="prevalence",
        indices=(0,),
        tau=0.0,
        sigma_min=sigma_obs,
        times=obs_gap * np.arange(1, n_frames + 1),
    )
    model = ModelDef(
        k=2,
        state_names=("x1", "x2"),
        params=params,
        drift=drift,
        diffusion=diffusion,
        init=init,
        streams=(stream,),
        jacobian=jacobian,
    )
    return model, a, q, p0


@pytest.fixture(scope="session")
def linear_problem():
    """Linear model plus one simulated dataset at theta = guess."""
    model, a, q, p0 = make_linear_model()
    theta = model.params.guess_transformed()
    series, path = simulate(model, theta, seed=7, dt=0.05)
    return {"model": model, "a": a, "q": q, "p0": p0, "theta": theta, "series": series}


@pytest.fixture(scope="session")
def bundled():
    """The two-city example with its default synthetic dataset."""
    model, params, config = build_two_city_si()
    theta_true = params.to_transformed(config["truth"])
    series, path = simulate(
        model, theta_true, seed=config["seed"], dt=config["dt"], missing=config["missing"]
    )
    return {
        "model": model,
        "params": params,
        "config": config,
        "theta_true": theta_true,
        "series": series,
        "path": path,
    }


def series_from_values(stream_name, times, values):
    from ssmkit import Frame

    frames = [Frame(float(t), stream_name, v) for t, v in zip(times, values)]
    return ObservationSeries(frames)
