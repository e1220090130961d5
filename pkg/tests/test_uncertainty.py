"""Distribution specs: moment matching, normal-space maps, sampling."""
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbtopt.uncertainty import (DistributionSpec, UncertaintyModel,
                                substream)


# oracle: mu_l = ln(m^2 / sqrt(m^2 + s^2)), sigma_l = sqrt(ln(1 + s^2/m^2))
# evaluated with mpmath-grade arithmetic for (1.0, 0.1); uniform bounds are
# mean -+ sqrt(3) * std
@pytest.mark.parametrize("family,mean,std,expected", [
    ("gaussian", 0.5, 0.25, (0.5, 0.25)),
    ("lognormal", 1.0, 0.1, (-0.0049751654265839124, 0.09975134511959267)),
    ("uniform", 0.3, 0.115, (0.1008141571295791, 0.4991858428704209)),
])
def test_parameterize_frozen_values(family, mean, std, expected):
    got = DistributionSpec(family, mean, std).parameterize()
    assert got[0] == pytest.approx(expected[0], rel=1e-12, abs=1e-14)
    assert got[1] == pytest.approx(expected[1], rel=1e-12)


def test_lognormal_moments_recovered_by_sampling():
    spec = DistributionSpec("lognormal", 1.0, 0.1)
    rng = np.random.default_rng(7)
    x = spec.from_standard_normal(rng.standard_normal(1_000_000))
    assert x.mean() == pytest.approx(1.0, rel=1e-2)
    assert x.std() == pytest.approx(0.1, rel=1e-2)
    assert np.all(x > 0.0)


def test_gaussian_sample_mean_clt():
    spec = DistributionSpec("gaussian", 0.5, 0.25)
    rng = np.random.default_rng(11)
    x = spec.from_standard_normal(rng.standard_normal(100_000))
    assert abs(x.mean() - 0.5) < 4.0 * 0.25 / np.sqrt(100_000)


def test_uniform_sample_stays_in_bounds():
    spec = DistributionSpec("uniform", 0.3, 0.115)
    rng = np.random.default_rng(3)
    x = spec.from_standard_normal(rng.standard_normal(50_000))
    lo, hi = spec.parameterize()
    assert x.min() >= lo and x.max() <= hi
    assert x.mean() == pytest.approx(0.3, abs=3e-3)
    assert x.std() == pytest.approx(0.115, rel=2e-2)


@pytest.mark.parametrize("family,mean,std", [
    ("gaussian", 0.5, 0.25),
    ("lognormal", 207000.0, 20700.0),
    ("uniform", 0.3, 0.115),
])
def test_round_trip_through_standard_normal(family, mean, std):
    spec = DistributionSpec(family, mean, std)
    u = np.linspace(-3.5, 3.5, 41)
    back = spec.to_standard_normal(spec.from_standard_normal(u))
    np.testing.assert_allclose(back, u, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("family,median", [
    ("gaussian", 0.5),
    ("uniform", 0.3),
])
def test_median_maps_to_zero(family, median):
    spec = DistributionSpec(family, 0.5 if family == "gaussian" else 0.3,
                            0.2 if family == "gaussian" else 0.115)
    assert spec.to_standard_normal(np.array([median]))[0] == pytest.approx(
        0.0, abs=1e-12)


def test_gaussian_map_is_affine_exact():
    spec = DistributionSpec("gaussian", 55.0, 20.0)
    u = np.array([-2.0, -0.5, 0.0, 1.0, 3.0])
    np.testing.assert_array_equal(spec.from_standard_normal(u), 55.0 + 20.0 * u)


@given(st.floats(-5.0, 5.0), st.floats(-5.0, 5.0))
@settings(max_examples=50)
def test_maps_preserve_order(u1, u2):
    for family, mean, std in (("gaussian", 1.0, 0.3),
                              ("lognormal", 2.0, 0.5),
                              ("uniform", 0.0, 1.0)):
        spec = DistributionSpec(family, mean, std)
        x1 = spec.from_standard_normal(np.array([u1]))[0]
        x2 = spec.from_standard_normal(np.array([u2]))[0]
        if u1 < u2:
            assert x1 <= x2
        elif u1 > u2:
            assert x1 >= x2


def test_uniform_out_of_bounds_warns_and_clips():
    spec = DistributionSpec("uniform", 0.0, 1.0)
    lo, hi = spec.parameterize()
    with pytest.warns(UserWarning):
        u = spec.to_standard_normal(np.array([hi + 1.0]))
    assert np.isfinite(u[0])


def test_zero_std_is_deterministic():
    spec = DistributionSpec("gaussian", 0.4, 0.0)
    x = spec.from_standard_normal(np.array([-2.0, 0.0, 2.0]))
    np.testing.assert_array_equal(x, 0.4)
    np.testing.assert_array_equal(spec.to_standard_normal(x), 0.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        DistributionSpec("beta", 1.0, 0.1)
    with pytest.raises(ValueError):
        DistributionSpec("gaussian", 1.0, -0.1)
    with pytest.raises(ValueError):
        DistributionSpec("lognormal", -1.0, 0.1)


def test_model_round_trip_and_dimension(beam_distributions):
    assert beam_distributions.dimension == 3
    u = np.array([[0.3, -1.2, 0.8], [0.0, 0.5, -2.1]])
    x = beam_distributions.sample_from_u(u)
    assert x.shape == (2, 3)
    np.testing.assert_allclose(beam_distributions.to_u(x), u,
                               rtol=1e-10, atol=1e-12)


def test_draw_arrays_shape_and_support(beam_distributions, rng):
    x = beam_distributions.draw_arrays(rng, 500)
    assert x.shape == (500, 3)
    # modulus is lognormal, poisson uniform within its bounds
    assert np.all(x[:, 1] > 0.0)
    lo, hi = beam_distributions.poisson.parameterize()
    assert x[:, 2].min() >= lo and x[:, 2].max() <= hi


def test_substream_determinism_and_separation():
    a1 = substream(42, 1, 7).standard_normal(4)
    a2 = substream(42, 1, 7).standard_normal(4)
    b = substream(42, 2, 7).standard_normal(4)
    np.testing.assert_array_equal(a1, a2)
    assert not np.array_equal(a1, b)
