"""Inference toolkit for partially observed Markovian state-space models.

Fast approximate algorithms (Latin hypercube screening, simplex search and
adaptive MCMC over a Kalman-filter likelihood) initialise exact ones
(particle-filter pseudo-marginal MCMC), so the expensive sampler starts at
the mode with a well-shaped proposal covariance.
"""

from .diagnostics import ess, relative_efficiency
from .ekf import FilterOutput, GaussianBelief, pack, packed_dim, predict, run_ekf, stabilize, unpack, update
from .integrate import IntegratorConfig, integrate
from .mcmc import (
    AdaptState,
    McmcTrace,
    ProposalCov,
    adapt_scale,
    current_proposal,
    initial_scale,
    kmcmc,
    metropolis_step,
    pmcmc,
    run_chain,
)
from .model import (
    MISSING,
    Frame,
    LatentPath,
    ModelDef,
    ObservationSeries,
    ObservationStream,
    deterministic_collapse,
)
from .optimize import LhsDesign, OptResult, ksimplex, lhs_sample, lhs_screen, nelder_mead, simplex
from .params import ParameterSet, ParamSpec
from .pf import ParticleEnsemble, PfOutput, propagate, run_pf, systematic_resample
from .simulate import simulate
from .twocity import build_two_city_si

__version__ = "0.1.0"

__all__ = [
    "AdaptState",
    "FilterOutput",
    "Frame",
    "GaussianBelief",
    "IntegratorConfig",
    "LatentPath",
    "LhsDesign",
    "MISSING",
    "McmcTrace",
    "ModelDef",
    "ObservationSeries",
    "ObservationStream",
    "OptResult",
    "ParamSpec",
    "ParameterSet",
    "ParticleEnsemble",
    "PfOutput",
    "ProposalCov",
    "adapt_scale",
    "build_two_city_si",
    "current_proposal",
    "deterministic_collapse",
    "ess",
    "initial_scale",
    "integrate",
    "kmcmc",
    "ksimplex",
    "lhs_sample",
    "lhs_screen",
    "metropolis_step",
    "nelder_mead",
    "pack",
    "packed_dim",
    "pmcmc",
    "predict",
    "propagate",
    "relative_efficiency",
    "run_chain",
    "run_ekf",
    "run_pf",
    "simplex",
    "simulate",
    "stabilize",
    "systematic_resample",
    "unpack",
    "update",
]
