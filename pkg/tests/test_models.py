import math

import numpy as np
import pytest
from scipy import integrate, stats

from mrl.models import (
    AnalyticModel,
    Exponential,
    GammaMrl,
    Pareto,
    Weibull,
    condition_diagnostics,
    limit_correlation,
    mrl,
    parse_model,
    residual_variance,
    sample,
    var_limit_process,
)

MODELS = [Exponential(2.0), Weibull(0.7), Weibull(2.0), Pareto(0.25), Pareto(0.1), GammaMrl(0.5)]


def direct_tail_integral(model, x):
    # plain quadrature of sf on (x, inf), no substitution
    val, _ = integrate.quad(lambda t: float(model.sf(t)), x, np.inf, epsabs=0, epsrel=1e-12, limit=500)
    return val


def test_mrl_examples():
    assert mrl(Exponential(2.0), 7.0) == 2.0
    assert mrl(Pareto(0.25), 4.0) == pytest.approx(8 / 3, rel=1e-15)
    assert mrl(GammaMrl(0.001), 0.0) == pytest.approx(2000.0, rel=1e-15)


def test_pareto_infinite_mean():
    with pytest.raises(ValueError, match="infinite mean"):
        mrl(Pareto(1.0), 1.0)


def test_pareto_infinite_variance():
    assert mrl(Pareto(0.6), 0.0) == pytest.approx(2.5)
    with pytest.raises(ValueError, match="infinite variance"):
        residual_variance(Pareto(0.6), 0.0)


def test_residual_variance_examples():
    assert residual_variance(Exponential(3.0), 5.0) == 9.0
    assert residual_variance(Weibull(1.0), 0.0) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("model", MODELS, ids=repr)
@pytest.mark.parametrize("mult", [0.0, 1.0, 3.0])
def test_mrl_identity_against_direct_quadrature(model, mult):
    x = mult * model.mean
    lhs = float(model.mrl(x)) * float(model.sf(x))
    assert lhs == pytest.approx(direct_tail_integral(model, x), rel=1e-7)


@pytest.mark.parametrize("theta", [0.5, 1.5, 2.0, 3.0])
@pytest.mark.parametrize("x", [0.0, 0.3, 2.0, 6.0, 40.0])
def test_weibull_mrl_incomplete_gamma_matches_quadrature(theta, x):
    model = Weibull(theta)
    quad = AnalyticModel.mrl(model, x)
    assert float(model.mrl(x)) == pytest.approx(quad, rel=1e-9)


def test_weibull_mrl_far_tail_and_shape():
    model = Weibull(2.0)
    xs = np.array([[0.5, 30.0], [1e3, 2.0]])  # 30^2 and 1e3^2 go to quadrature
    out = model.mrl(xs)
    assert out.shape == (2, 2)
    # e(x) ~ 1 / (theta x^(theta-1)) for large x
    assert out[1, 0] == pytest.approx(1 / (2 * 1e3), rel=1e-6)
    assert out[0, 1] == pytest.approx(AnalyticModel.mrl(model, 30.0), rel=1e-9)


@pytest.mark.parametrize("c", [0.1, 0.25, 0.4])
@pytest.mark.parametrize("x", [0.0, 1.0, 50.0])
def test_pareto_variance_matches_generalized_pareto(c, x):
    # excess over x is generalized Pareto with scale 1 + c x and shape c
    expected = stats.genpareto(c, scale=1 + c * x).var()
    assert float(Pareto(c).residual_variance(x)) == pytest.approx(expected, rel=1e-8)


@pytest.mark.parametrize("x", [0.0, 1.0, 4.0])
def test_gamma_moments_against_scipy(x):
    alpha = 0.5
    model = GammaMrl(alpha)
    dist = stats.gamma(2.0, scale=1 / alpha)
    assert model._mrl_quad(x) == pytest.approx(float(model.mrl(x)), rel=1e-9)
    m1 = dist.expect(lambda y: y - x, lb=x, conditional=True)
    m2 = dist.expect(lambda y: (y - x) ** 2, lb=x, conditional=True)
    assert float(model.residual_variance(x)) == pytest.approx(m2 - m1**2, rel=1e-7)
    assert float(model.sf(x)) == pytest.approx(dist.sf(x), rel=1e-12)
    assert float(model.pdf(x)) == pytest.approx(dist.pdf(x), rel=1e-12, abs=1e-300)


def test_exponential_constant():
    m = Exponential(1.7)
    xs = [0.0, 0.5, 3.0, 10.0, 40.0]
    assert all(mrl(m, x) == 1.7 for x in xs)
    assert all(residual_variance(m, x) == pytest.approx(1.7**2) for x in xs)


def test_pareto_mrl_is_affine():
    c = 0.3
    m = Pareto(c)
    h = 1e-3
    for x in (0.5, 5.0, 50.0):
        slope = (float(m.mrl(x + h)) - float(m.mrl(x - h))) / (2 * h)
        assert slope == pytest.approx(c / (1 - c), abs=1e-9)


@pytest.mark.parametrize("c", [0.1, 0.25, 0.4])
def test_cv2_limit(c):
    m = Pareto(c)
    x = 1e4 * m.mean
    ratio = float(m.residual_variance(x)) / float(m.mrl(x)) ** 2
    assert ratio == pytest.approx(1 / (1 - 2 * c), rel=0.01)


def test_var_limit_process():
    assert var_limit_process(Exponential(1.0), 0.0) == pytest.approx(1.0)
    theta = 2.0
    for x in (0.5, 3.0):
        assert var_limit_process(Exponential(theta), x) == pytest.approx(theta**2 * math.exp(x / theta))


def test_var_limit_process_pareto_growth():
    m = Pareto(0.25)
    x1, x2 = 1e5, 1e6
    slope = math.log(var_limit_process(m, x2) / var_limit_process(m, x1)) / math.log(x2 / x1)
    assert slope == pytest.approx(6.0, rel=1e-3)


def test_limit_correlation_exponential():
    assert limit_correlation(Exponential(1.0), 0.0, math.log(2)) == pytest.approx(math.sqrt(0.5))


def test_sampler_mean_and_determinism():
    s = sample(Exponential(1.0), 100_000, seed=11)
    assert abs(s.mean - 1.0) < 0.02
    assert np.array_equal(s.values, sample(Exponential(1.0), 100_000, seed=11).values)


def test_sampler_pareto_median():
    m = Pareto(0.25)
    s = sample(m, 100_000, seed=12)
    frac = np.mean(s.values <= float(m.ppf(0.5)))
    assert abs(frac - 0.5) < 0.01


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_sampler_ks(model):
    s = sample(model, 100_000, seed=13)
    d = stats.kstest(s.values, lambda x: model.cdf(x)).statistic
    assert d < 0.01


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_isf_inverts_sf(model):
    p = np.array([1.0, 0.999, 0.5, 1e-3, 1e-8])
    np.testing.assert_allclose(model.sf(model.isf(p)), p, rtol=1e-10)


def test_diagnostics_exponential():
    rep = condition_diagnostics(Exponential(1.0), [10.0])
    assert abs(rep.c_estimate) < 1e-6


def test_diagnostics_pareto():
    rep = condition_diagnostics(Pareto(0.25))
    assert rep.c_estimate == pytest.approx(0.25, abs=1e-4)
    assert rep.condition3 and rep.condition4a and rep.condition4b
    assert 0 <= rep.c_estimate <= 1 / rep.moment_order
    assert rep.cv2_ratios[-1] == pytest.approx(2.0, rel=1e-6)


def test_diagnostics_weibull():
    rep = condition_diagnostics(Weibull(2.0))
    assert abs(rep.c_estimate) < 1e-6
    assert rep.condition4a


def test_diagnostics_heavy_pareto_fails_condition3():
    rep = condition_diagnostics(Pareto(0.6))
    assert not rep.condition3 and not rep.condition4a
    assert rep.cv2_ratios == ()


@pytest.mark.parametrize(
    "text, expected",
    [("exp:2", Exponential(2.0)), ("weibull:1.5", Weibull(1.5)), ("pareto:0.25", Pareto(0.25)),
     ("gammamrl:0.001", GammaMrl(0.001))],
)
def test_parse_model(text, expected):
    assert parse_model(text) == expected
    assert parse_model(expected.spec) == expected


@pytest.mark.parametrize("text", ["normal:1", "exp:abc", "exp:-1", "pareto:0", "exp:1,2"])
def test_parse_model_errors(text):
    with pytest.raises(ValueError):
        parse_model(text)
