import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from cauchy_im import cauchy
from cauchy_im.cauchy import IDENTITY, RECIPROCAL, CauchyParams, MobiusCoeffs
from cauchy_im.errors import DomainError

finite = st.floats(-1e3, 1e3, allow_nan=False)
positive = st.floats(1e-2, 1e2)


@given(finite, finite, positive)
def test_pdf_cdf_match_scipy(x, mu, sigma):
    p = CauchyParams(mu, sigma)
    ref = stats.cauchy(loc=mu, scale=sigma)
    assert math.isclose(cauchy.pdf(x, p), ref.pdf(x), rel_tol=1e-12)
    assert math.isclose(cauchy.cdf(x, p), ref.cdf(x), rel_tol=1e-10, abs_tol=1e-15)
    assert math.isclose(cauchy.logpdf(x, p), ref.logpdf(x), rel_tol=1e-12)


@given(st.floats(1e-6, 1 - 1e-6), finite, positive)
def test_quantile_inverts_cdf(p, mu, sigma):
    par = CauchyParams(mu, sigma)
    assert math.isclose(float(cauchy.cdf(cauchy.quantile(p, par), par)), p, rel_tol=1e-9, abs_tol=1e-12)


def test_cdf_limits_are_exact():
    assert cauchy.cdf(-np.inf) == 0.0
    assert cauchy.cdf(np.inf) == 1.0


@pytest.mark.parametrize("bad", [(0.0, 0.0), (0.0, -1.0), (math.inf, 1.0), (0.0, math.nan)])
def test_params_validated(bad):
    with pytest.raises(DomainError):
        CauchyParams(*bad)


def test_quantile_domain():
    with pytest.raises(DomainError):
        cauchy.quantile([0.5, 1.0])


def test_degenerate_mobius_rejected():
    with pytest.raises(DomainError):
        MobiusCoeffs(1, 2, 2, 4)


def test_reciprocal_parameters():
    mu, sigma = 1.5, 0.5
    out = cauchy.mobius_transform(CauchyParams(mu, sigma), RECIPROCAL)
    r2 = mu * mu + sigma * sigma
    assert out.mu == pytest.approx(mu / r2, rel=1e-14)
    assert out.sigma == pytest.approx(sigma / r2, rel=1e-14)


coeff = st.floats(-5, 5, allow_nan=False)


@given(coeff, coeff, coeff, coeff, coeff, coeff, coeff, coeff, finite, positive)
def test_mobius_composition(a, b, c, d, e, f, g, h, mu, sigma):
    if abs(a * d - b * c) < 1e-3 or abs(e * h - f * g) < 1e-3:
        return
    outer, inner = MobiusCoeffs(a, b, c, d), MobiusCoeffs(e, f, g, h)
    p = CauchyParams(mu, sigma)
    try:
        step = cauchy.mobius_transform(cauchy.mobius_transform(p, inner), outer)
        both = cauchy.mobius_transform(p, outer.compose(inner))
    except DomainError:
        return
    scale = 1.0 + abs(step.mu) + step.sigma
    assert abs(step.mu - both.mu) <= 1e-8 * scale
    assert abs(step.sigma - both.sigma) <= 1e-8 * scale


def test_identity_transform_is_noop():
    p = CauchyParams(0.3, 2.0)
    assert cauchy.mobius_transform(p, IDENTITY) == p
    x = np.array([1.0, -2.0, 3.5])
    assert np.array_equal(cauchy.transform_data(x, IDENTITY), x)


def test_transform_data_pole():
    with pytest.raises(DomainError, match="index 1"):
        cauchy.transform_data([1.0, 0.0], RECIPROCAL)


def test_streams_reproducible_and_distinct():
    a = cauchy.sample(50, seed=7, stream=(3,))
    b = cauchy.sample(50, seed=7, stream=(3,))
    c = cauchy.sample(50, seed=7, stream=(4,))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.array_equal(cauchy.rng_for(7, 3).random(5), cauchy.rng_for(7, 3).random(5))


def test_sample_distribution():
    x = cauchy.sample(20_000, CauchyParams(2.0, 3.0), seed=1)
    assert stats.kstest(x, stats.cauchy(loc=2.0, scale=3.0).cdf).pvalue > 1e-3


def test_sample_size_validated():
    with pytest.raises(DomainError):
        cauchy.sample(0)
