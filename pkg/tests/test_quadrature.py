import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sint
from scipy import stats

from cauchy_im.errors import DomainError
from cauchy_im.quadrature import (integrate, invert_monotone, log_lorentzian_product_integral,
                                  log_scale_mixture, normalize)


def test_integrate_lorentzian_real_line():
    r = integrate(lambda x: 1.0 / (1.0 + x * x))
    assert r.value == pytest.approx(math.pi, rel=1e-12)


def test_integrate_half_lines_and_points():
    assert integrate(lambda x: np.exp(-x), 0.0, math.inf).value == pytest.approx(1.0, rel=1e-12)
    assert integrate(lambda x: np.exp(x), -math.inf, 0.0).value == pytest.approx(1.0, rel=1e-12)
    # a narrow spike far from the origin is found through ``points``
    f = lambda x: 1e-3 / (1e-6 + (x - 500.0) ** 2)
    assert integrate(f, points=[500.0]).value == pytest.approx(math.pi, rel=1e-9)


def test_integrate_reversed_bounds():
    assert integrate(np.cos, 1.0, 0.0).value == pytest.approx(-math.sin(1.0), rel=1e-13)


def test_invert_monotone():
    x = invert_monotone(np.tanh, 0.5, (-3.0, 3.0), tol=1e-14)
    assert x == pytest.approx(math.atanh(0.5), abs=1e-13)
    with pytest.raises(DomainError):
        invert_monotone(np.tanh, 2.0, (-3.0, 3.0))


@pytest.fixture(scope="module")
def std_cauchy():
    return normalize(lambda u: -np.log1p(u * u), "real")


def test_normalized_cauchy_matches_closed_form(std_cauchy):
    u = np.linspace(-50, 50, 101)
    assert np.max(np.abs(std_cauchy.cdf(u) - stats.cauchy.cdf(u))) < 1e-12
    assert np.max(np.abs(std_cauchy.pdf(u) / stats.cauchy.pdf(u) - 1)) < 1e-11


@given(st.floats(1e-9, 1 - 1e-9))
def test_quantile_roundtrip(p):
    dens = normalize(lambda u: -np.log1p(u * u), "real")
    assert float(dens.cdf(dens.quantile(p))) == pytest.approx(p, abs=1e-11)


def test_contour_mass_closed_form(std_cauchy):
    # {f(U) <= f(u)} = {|U| >= |u|}
    for u in (0.0, 0.3, 1.0, 7.0, 200.0):
        want = 2.0 * stats.cauchy.cdf(-abs(u))
        assert std_cauchy.contour_plausibility(u) == pytest.approx(want, abs=1e-11)


def test_level_for_mass_below(std_cauchy):
    c = std_cauchy.level_for_mass_below(0.05)
    assert std_cauchy.mass_below(c) == pytest.approx(0.05, abs=1e-11)
    # the 95% highest-density set is |u| < tan(0.475 pi)
    assert math.exp(c + std_cauchy.log_norm) == pytest.approx(1.0 / (1 + math.tan(0.475 * math.pi) ** 2),
                                                             rel=1e-8)


def test_positive_domain_gamma():
    dens = normalize(lambda s: 2.0 * np.log(s) - s, "positive", center=3.0)
    s = np.array([0.1, 1.0, 3.0, 10.0, 40.0])
    assert np.max(np.abs(dens.cdf(s) - stats.gamma(3).cdf(s))) < 1e-11
    assert dens.mean() == pytest.approx(3.0, rel=1e-10)
    # a value-based maximizer resolves the argmax to about sqrt(eps)
    assert dens.mode() == pytest.approx(2.0, rel=1e-7)


def test_bimodal_superlevel_split():
    dens = normalize(lambda x: np.logaddexp(-0.5 * (x + 4) ** 2, -0.5 * (x - 4) ** 2), "real",
                     breakpoints=[-4.0, 4.0])
    c = float(dens.logpdf(0.0)) + 1.0
    assert dens.superlevel_intervals(c).shape == (2, 2)
    assert dens.max_logpdf(-1.0, 1.0) == pytest.approx(float(dens.logpdf(-1.0)), abs=1e-12)


def test_sample_matches_cdf(std_cauchy):
    x = std_cauchy.sample(20_000, np.random.default_rng(0))
    assert stats.kstest(x, stats.cauchy.cdf).pvalue > 1e-3


def _product_integral_quad(c, width):
    f = lambda t: np.prod(1.0 / (1.0 + ((t - c) / width) ** 2))
    pts = sorted(set(np.round(c, 12)))
    a, b = pts[0] - 50 * width, pts[-1] + 50 * width
    mid = sint.quad(f, a, b, points=pts if len(pts) < 50 else None, limit=500, epsabs=0, epsrel=1e-13)[0]
    left = sint.quad(f, -np.inf, a, epsabs=0, epsrel=1e-13)[0]
    right = sint.quad(f, b, np.inf, epsabs=0, epsrel=1e-13)[0]
    return mid + left + right


@pytest.mark.parametrize("c,width", [
    ([0.0], 1.0),
    ([0.0, 1.0], 1.0),
    ([0.0, 1.0, 1.5, 7.0], 0.3),
    ([-2.0, 0.0, 0.1, 40.0, 41.0], 0.05),
    ([0.0, 10.0, 25.0], 1.0),
])
def test_lorentzian_product_vs_scipy(c, width):
    c = np.array(c)
    got = log_lorentzian_product_integral(c[None, :], width)[0]
    assert got == pytest.approx(math.log(_product_integral_quad(c, width)), abs=1e-10)


@given(st.lists(st.floats(-30, 30), min_size=2, max_size=6, unique=True))
def test_residue_and_ladder_agree(c):
    c = np.array(sorted(c))
    if np.min(np.diff(c)) < 4.0:
        c = c + 4.0 * np.arange(c.size)
    fast = log_lorentzian_product_integral(c[None, :])[0]
    ladder = log_lorentzian_product_integral(c[None, :], residue_gap=None)[0]
    assert fast == pytest.approx(ladder, abs=1e-8)


def test_scale_mixture_vs_scipy():
    b = np.array([0.5, 2.0, 9.0])
    alpha = 3.0
    f = lambda s: s ** (alpha - 1) * np.prod(1.0 / (1.0 + b * s * s))
    want = sint.quad(f, 0, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]
    got = log_scale_mixture(np.log(b)[None, :], alpha)[0]
    assert got == pytest.approx(math.log(want), abs=1e-11)


def test_scale_mixture_divergent_row_is_inf():
    # alpha >= 2 k makes the integral diverge at infinity
    assert log_scale_mixture(np.log([[1.0]]), 2.0)[0] == np.inf
    # a zero coefficient drops out of the decay count
    assert log_scale_mixture(np.array([[-np.inf, 0.0]]), 1.0)[0] == pytest.approx(math.log(math.pi / 2), abs=1e-12)


def test_normalize_rejects_bad_domain():
    with pytest.raises(DomainError):
        normalize(lambda x: -x * x, "circle")
    with pytest.raises(DomainError):
        normalize(lambda x: -x, "positive", center=-1.0)
