"""Adaptive random-walk Metropolis over the transformed parameter space.

The proposal covariance is managed in two phases. First a scalar prefactor
is tuned toward the 23.4% acceptance rate classical for Gaussian random
walks (Roberts, Gelman and Gilks 1997), with a cooling schedule that
freezes the tuning as the chain progresses. Once enough proposals have
been accepted, the proposal switches to the empirical covariance of the
chain so far, scaled by 2.38^2/d (Roberts and Rosenthal 2009).

The same kernel serves the deterministic filter likelihood and the
particle filter likelihood. With the particle filter the chain is
pseudo-marginal: each proposal gets a fresh likelihood estimate and the
estimate attached to the current point is never recomputed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ekf import IntegratorConfig, run_ekf
from .errors import NotEnoughSamplesError
from .pf import run_pf

TARGET_ACCEPTANCE = 0.234
OPTIMAL_SCALING = 2.38**2


@dataclass
class ProposalCov:
    sigma: np.ndarray
    provenance: str  # "diag-from-sd_transf", "empirical" or "file"


@dataclass
class AdaptState:
    """Mutable adaptation bookkeeping carried along the chain."""

    d: int
    cooling: float
    switch_after: int
    epsilon: float = 1.0
    accepted_count: int = 0
    iteration: int = 0
    phase: str = "scale"  # "scale" then "empirical", never back
    n_samples: int = 0
    mean: np.ndarray = None
    m2: np.ndarray = None

    def __post_init__(self):
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling factor must lie in (0, 1)")
        if self.mean is None:
            self.mean = np.zeros(self.d)
        if self.m2 is None:
            self.m2 = np.zeros((self.d, self.d))

    @property
    def cov_factor(self):
        return OPTIMAL_SCALING / self.d

    def push_sample(self, theta):
        """Single-pass covariance update with one chain sample."""
        self.n_samples += 1
        delta = theta - self.mean
        self.mean = self.mean + delta / self.n_samples
        self.m2 = self.m2 + np.outer(delta, theta - self.mean)

    def empirical_cov(self):
        if self.n_samples < 2:
            raise NotEnoughSamplesError("need at least two samples for an empirical covariance")
        return self.m2 / self.n_samples

    @property
    def distinct_samples(self):
        return self.accepted_count + 1


def initial_scale(d):
    """Initial prefactor and the covariance-level optimal scaling 2.38^2/d."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return 1.0, OPTIMAL_SCALING / d


def adapt_scale(epsilon, acc_rate, cooling, iteration):
    """One multiplicative update of the scalar prefactor.

    The exponent decays geometrically with the iteration index so the
    adaptation freezes as the chain matures.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if not 0.0 <= acc_rate <= 1.0:
        raise ValueError("acc_rate must lie in [0, 1]")
    if not 0.0 < cooling < 1.0:
        raise ValueError("cooling factor must lie in (0, 1)")
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    return float(epsilon * np.exp(cooling**iteration * (acc_rate - TARGET_ACCEPTANCE)))


def current_proposal(adapt, cov0, cov0_provenance="diag-from-sd_transf"):
    """Proposal covariance implied by the adaptation state."""
    if adapt.phase == "scale":
        return ProposalCov(adapt.cov_factor * adapt.epsilon**2 * cov0, cov0_provenance)
    if adapt.distinct_samples < adapt.d + 1:
        raise NotEnoughSamplesError(
            f"empirical proposal needs {adapt.d + 1} distinct samples, have {adapt.distinct_samples}"
        )
    emp = adapt.empirical_cov()
    ridge = 1e-9 * np.trace(emp) / adapt.d
    return ProposalCov(adapt.cov_factor * (emp + ridge * np.eye(adapt.d)), "empirical")


def metropolis_step(theta, loglik, logprior, chol, loglik_fn, logprior_fn, rng):
    """One random-walk Metropolis transition.

    Out-of-support proposals are rejected without touching the likelihood
    backend. The current point's stored log-likelihood is reused as is,
    which keeps the kernel valid for pseudo-marginal backends.
    """
    proposal = theta + chol @ rng.standard_normal(theta.size)
    logprior_new = logprior_fn(proposal)
    if logprior_new == -np.inf:
        return theta, loglik, logprior, False
    loglik_new = loglik_fn(proposal)
    new_total = loglik_new + logprior_new
    cur_total = loglik + logprior
    if new_total == -np.inf:
        accept = False
    elif cur_total == -np.inf:
        accept = True
    else:
        accept = np.log(rng.random()) < new_total - cur_total
    if accept:
        return proposal, loglik_new, logprior_new, True
    return theta, loglik, logprior, False


@dataclass
class McmcTrace:
    names: tuple[str, ...]
    thetas: np.ndarray  # (M, d)
    loglik: np.ndarray
    logprior: np.ndarray
    accepted: np.ndarray  # bool
    epsilon: np.ndarray
    snapshots: dict  # iteration -> empirical covariance estimate
    backend: str

    def __len__(self):
        return self.thetas.shape[0]

    @property
    def d(self):
        return self.thetas.shape[1]

    def acceptance_rate(self):
        return float(np.mean(self.accepted))

    def final_cov(self):
        iters = sorted(self.snapshots)
        return self.snapshots[iters[-1]]


def run_chain(
    theta0,
    cov0,
    loglik_fn,
    logprior_fn,
    iterations,
    *,
    cooling=0.999,
    switch_after=100,
    seed=0,
    snapshot_every=1000,
    adaptive=True,
    backend="custom",
    cov0_provenance="file",
):
    """Run the adaptive chain and return its full trace.

    ``cov0`` is the unscaled proposal covariance; the 2.38^2/d factor is
    applied here, never stored in files. With ``adaptive=False`` the
    proposal stays fixed at that scaled covariance for the whole run,
    which is the configuration used for efficiency comparisons between
    candidate covariances.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    theta = np.asarray(theta0, dtype=float).copy()
    d = theta.size
    cov0 = np.asarray(cov0, dtype=float)
    if cov0.shape != (d, d):
        raise ValueError(f"cov0 shape {cov0.shape} does not match d={d}")
    rng = np.random.default_rng(seed)
    adapt = AdaptState(d=d, cooling=cooling, switch_after=switch_after)

    logprior = logprior_fn(theta)
    loglik = loglik_fn(theta) if logprior > -np.inf else -np.inf

    thetas = np.empty((iterations, d))
    logliks = np.empty(iterations)
    logpriors = np.empty(iterations)
    accepts = np.zeros(iterations, dtype=bool)
    epsilons = np.empty(iterations)
    snapshots = {}

    adapt.push_sample(theta)
    proposal = current_proposal(adapt, cov0, cov0_provenance)
    chol = np.linalg.cholesky(proposal.sigma)

    for i in range(iterations):
        adapt.iteration = i
        theta, loglik, logprior, accepted = metropolis_step(
            theta, loglik, logprior, chol, loglik_fn, logprior_fn, rng
        )
        if accepted:
            adapt.accepted_count += 1
        thetas[i] = theta
        logliks[i] = loglik
        logpriors[i] = logprior
        accepts[i] = accepted
        epsilons[i] = adapt.epsilon
        adapt.push_sample(theta)

        if adaptive:
            switched = False
            if (
                adapt.phase == "scale"
                and adapt.accepted_count >= adapt.switch_after
                and adapt.distinct_samples >= d + 1
            ):
                adapt.phase = "empirical"
                switched = True
            if adapt.phase == "scale":
                acc_rate = adapt.accepted_count / (i + 1)
                adapt.epsilon = adapt_scale(adapt.epsilon, acc_rate, cooling, i)
            proposal = current_proposal(adapt, cov0, cov0_provenance)
            chol = np.linalg.cholesky(proposal.sigma)
            if switched or (i + 1) % snapshot_every == 0:
                snapshots[i + 1] = _cov_estimate(adapt, cov0)
        elif (i + 1) % snapshot_every == 0:
            snapshots[i + 1] = _cov_estimate(adapt, cov0)

    snapshots[iterations] = _cov_estimate(adapt, cov0)
    return McmcTrace(
        names=tuple(f"theta{j}" for j in range(d)),
        thetas=thetas,
        loglik=logliks,
        logprior=logpriors,
        accepted=accepts,
        epsilon=epsilons,
        snapshots=snapshots,
        backend=backend,
    )


def _cov_estimate(adapt, cov0):
    if adapt.n_samples >= 2 and adapt.distinct_samples >= 2:
        return adapt.empirical_cov()
    return np.asarray(cov0, dtype=float).copy()


def kmcmc(
    model,
    series,
    theta0,
    cov0,
    iterations,
    *,
    cooling=0.999,
    switch_after=100,
    seed=0,
    snapshot_every=1000,
    adaptive=True,
    integrator=IntegratorConfig(),
):
    """Adaptive chain driven by the deterministic filter likelihood."""

    def loglik_fn(theta):
        return run_ekf(model, theta, series, integrator).loglik

    trace = run_chain(
        theta0,
        cov0,
        loglik_fn,
        model.params.log_prior,
        iterations,
        cooling=cooling,
        switch_after=switch_after,
        seed=seed,
        snapshot_every=snapshot_every,
        adaptive=adaptive,
        backend="ekf",
    )
    trace.names = tuple(model.params.names)
    return trace


def pmcmc(
    model,
    series,
    theta0,
    cov0,
    iterations,
    *,
    n_particles=1000,
    dt=None,
    cooling=0.999,
    switch_after=100,
    seed=0,
    snapshot_every=1000,
    adaptive=True,
    workers=1,
):
    """Pseudo-marginal chain driven by the particle filter likelihood.

    Every proposal is scored with a fresh filter seed drawn from a
    dedicated stream, so reruns with the same chain seed reproduce the
    trace exactly.
    """
    pf_seed_gen = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 0x5EED]))

    def loglik_fn(theta):
        pf_seed = int(pf_seed_gen.integers(2**62))
        return run_pf(model, theta, series, n_particles, dt, pf_seed, workers).loglik

    trace = run_chain(
        theta0,
        cov0,
        loglik_fn,
        model.params.log_prior,
        iterations,
        cooling=cooling,
        switch_after=switch_after,
        seed=seed,
        snapshot_every=snapshot_every,
        adaptive=adaptive,
        backend="pf",
    )
    trace.names = tuple(model.params.names)
    return trace
