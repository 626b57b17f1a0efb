"""Parameter metadata, scale transforms and the uniform-with-Jacobian prior.

Every parameter carries a transform that maps its natural scale onto an
unconstrained sampling scale. Optimisers and samplers work exclusively on
the transformed scale; model code receives natural values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfDomainError

TRANSFORMS = ("identity", "log", "logit")


@dataclass(frozen=True)
class ParamSpec:
    """Metadata for one scalar parameter.

    Parameters
    ----------
    name : str
        Identifier used in model expressions and output files.
    transform : {"identity", "log", "logit"}
        Map from the natural scale to the sampling scale. ``logit`` is
        taken on the ``bounds`` interval.
    guess : float
        Natural-scale starting value.
    sd_transf : float
        Proposal standard deviation on the transformed scale. The squares
        of these form the default diagonal proposal covariance.
    bounds : tuple of float
        Natural-scale (min, max) supporting the uniform prior and, for
        ``logit``, defining the transform itself.
    """

    name: str
    transform: str
    guess: float
    sd_transf: float
    bounds: tuple[float, float]

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r} for {self.name!r}")
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError(f"{self.name!r}: bounds must satisfy min < max, got {self.bounds}")
        if self.sd_transf <= 0:
            raise ValueError(f"{self.name!r}: sd_transf must be > 0")
        if self.transform == "log" and (self.guess <= 0 or lo <= 0):
            raise ValueError(f"{self.name!r}: log transform needs positive guess and bounds")
        if self.transform == "logit" and not (lo < self.guess < hi):
            raise ValueError(f"{self.name!r}: guess must lie strictly inside bounds for logit")

    def to_transformed(self, value):
        lo, hi = self.bounds
        if self.transform == "identity":
            return float(value)
        if self.transform == "log":
            if value <= 0:
                raise OutOfDomainError(self.name, value)
            return float(np.log(value))
        if not lo < value < hi:
            raise OutOfDomainError(self.name, value)
        return float(np.log((value - lo) / (hi - value)))

    def to_natural(self, theta):
        lo, hi = self.bounds
        if self.transform == "identity":
            return float(theta)
        if self.transform == "log":
            return float(np.exp(theta))
        s = _sigmoid(theta)
        return float(lo + (hi - lo) * s)

    def log_prior(self, theta):
        """Log density of the uniform-on-bounds prior, on the transformed scale."""
        lo, hi = self.bounds
        width = hi - lo
        if self.transform == "identity":
            return -np.log(width) if lo <= theta <= hi else -np.inf
        if self.transform == "log":
            if np.log(lo) <= theta <= np.log(hi):
                return float(theta - np.log(width))
            return -np.inf
        # logit: every real theta maps inside (lo, hi); density sigma'(theta)
        return float(-np.logaddexp(0.0, -theta) - np.logaddexp(0.0, theta))

    def transformed_bounds(self):
        """Image of the prior support under the transform. Infinite for logit."""
        lo, hi = self.bounds
        if self.transform == "identity":
            return (lo, hi)
        if self.transform == "log":
            return (float(np.log(lo)), float(np.log(hi)))
        return (-np.inf, np.inf)


def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


class ParameterSet:
    """Ordered collection of ParamSpecs defining the sampling space."""

    def __init__(self, specs):
        self.specs = list(specs)
        names = [s.name for s in self.specs]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")
        self.names = names

    @property
    def d(self):
        return len(self.specs)

    def __iter__(self):
        return iter(self.specs)

    def __len__(self):
        return len(self.specs)

    def to_transformed(self, natural):
        """Map natural-scale values (sequence or name->value dict) to a theta vector."""
        if isinstance(natural, dict):
            natural = [natural[n] for n in self.names]
        values = np.asarray(natural, dtype=float)
        if values.shape != (self.d,):
            raise ValueError(f"expected {self.d} values, got shape {values.shape}")
        return np.array([s.to_transformed(v) for s, v in zip(self.specs, values)])

    def to_natural(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.d,):
            raise ValueError(f"expected theta of dimension {self.d}, got shape {theta.shape}")
        return np.array([s.to_natural(t) for s, t in zip(self.specs, theta)])

    def natural_dict(self, theta):
        return dict(zip(self.names, self.to_natural(theta)))

    def log_prior(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.d,):
            raise ValueError(f"expected theta of dimension {self.d}, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            return -np.inf
        total = 0.0
        for s, t in zip(self.specs, theta):
            lp = s.log_prior(t)
            if lp == -np.inf:
                return -np.inf
            total += lp
        return total

    def guess_transformed(self):
        return self.to_transformed([s.guess for s in self.specs])

    def default_cov(self):
        """Diagonal proposal covariance built from the squared sd_transf entries."""
        return np.diag([s.sd_transf**2 for s in self.specs])

    def transformed_bounds(self):
        return [s.transformed_bounds() for s in self.specs]
