import math

import numpy as np
import pytest

from ssmkit import ParamSpec, ParameterSet
from ssmkit.errors import OutOfDomainError

from .oracles import gaussian_quadrature_mass


def spec(transform, guess=1.0, bounds=(0.5, 20.0), sd=0.1, name="p"):
    return ParamSpec(name=name, transform=transform, guess=guess, sd_transf=sd, bounds=bounds)


class TestTransforms:
    def test_log_identity_point(self):
        assert spec("log").to_transformed(1.0) == 0.0

    def test_logit_symmetry_point(self):
        s = spec("logit", guess=0.5, bounds=(0.0, 1.0))
        assert s.to_transformed(0.5) == pytest.approx(0.0, abs=1e-15)

    def test_log_of_13_and_round_trip(self):
        s = spec("log")
        theta = s.to_transformed(13.0)
        assert theta == pytest.approx(math.log(13.0), rel=1e-15)
        assert s.to_natural(theta) == pytest.approx(13.0, rel=1e-12)

    def test_out_of_domain(self):
        with pytest.raises(OutOfDomainError):
            spec("log").to_transformed(-1.0)
        with pytest.raises(OutOfDomainError):
            spec("logit", guess=0.7, bounds=(0.0, 1.0)).to_transformed(1.5)

    def test_round_trip_thousand_random_vectors(self):
        specs = [
            spec("identity", guess=0.0, bounds=(-3.0, 5.0), name="a"),
            spec("log", guess=2.0, bounds=(0.1, 50.0), name="b"),
            spec("logit", guess=0.4, bounds=(0.2, 0.9), name="c"),
        ]
        ps = ParameterSet(specs)
        rng = np.random.default_rng(1)
        for _ in range(1000):
            natural = np.array(
                [rng.uniform(lo + 1e-6, hi - 1e-6) for (lo, hi) in (s.bounds for s in specs)]
            )
            back = ps.to_natural(ps.to_transformed(natural))
            assert np.allclose(back, natural, rtol=1e-12, atol=0.0)


class TestPrior:
    def test_out_of_support(self):
        ps = ParameterSet([spec("identity", guess=0.5, bounds=(0.0, 1.0))])
        assert ps.log_prior(np.array([2.0])) == -np.inf

    def test_identity_unit_interval_density(self):
        ps = ParameterSet([spec("identity", guess=0.5, bounds=(0.0, 1.0))])
        assert ps.log_prior(np.array([0.3])) == pytest.approx(0.0)

    def test_log_transform_jacobian_value(self):
        # uniform on [1, e] in natural space, log transform
        s = spec("log", guess=2.0, bounds=(1.0, math.e))
        assert s.log_prior(0.5) == pytest.approx(-math.log(math.e - 1.0) + 0.5, rel=1e-12)
        mass = gaussian_quadrature_mass(s.log_prior, 0.0, 1.0)
        assert mass == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize(
        "s, lo, hi",
        [
            (spec("identity", guess=0.0, bounds=(-2.0, 3.0)), -2.0, 3.0),
            (spec("log", guess=1.0, bounds=(0.5, 8.0)), math.log(0.5), math.log(8.0)),
            (spec("logit", guess=0.5, bounds=(0.1, 0.7)), -40.0, 40.0),
        ],
    )
    def test_prior_normalizes(self, s, lo, hi):
        mass = gaussian_quadrature_mass(s.log_prior, lo, hi)
        assert 0.999 <= mass <= 1.001


class TestValidation:
    def test_guess_outside_bounds_rejected_for_logit(self):
        with pytest.raises(ValueError):
            ParamSpec(name="x", transform="logit", guess=1.5, sd_transf=0.1, bounds=(0.0, 1.0))

    def test_nonpositive_guess_rejected_for_log(self):
        with pytest.raises(ValueError):
            ParamSpec(name="x", transform="log", guess=-1.0, sd_transf=0.1, bounds=(0.1, 1.0))

    def test_sd_transf_positive(self):
        with pytest.raises(ValueError):
            ParamSpec(name="x", transform="identity", guess=0.5, sd_transf=0.0, bounds=(0.0, 1.0))

    def test_default_cov_is_squared_sds(self):
        ps = ParameterSet([spec("log", sd=0.02, name="a"), spec("log", sd=0.5, name="b")])
        assert np.allclose(np.diag(ps.default_cov()), [0.02**2, 0.5**2])
