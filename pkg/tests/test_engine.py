import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import stats

from cauchy_im.engine import (SET_KINDS, Assertion, MonotoneMap, PlausibilityCurve, RandomSetSpec,
                              basic_map, basic_plausibility, belief_and_plausibility,
                              curve_from_function, plausibility_interval, validity_check)
from cauchy_im.errors import CapabilityError, DomainError, EmptyIntervalError

F = stats.cauchy.cdf


@pytest.mark.parametrize("kind,want", [
    ("cdf-centered", lambda u: 1 - abs(2 * F(u) - 1)),
    ("one-sided-lower", lambda u: F(u)),
    ("one-sided-upper", lambda u: 1 - F(u)),
    ("density-contour", lambda u: 2 * F(-abs(u))),
])
def test_containment_closed_forms(kind, want):
    rs = RandomSetSpec(kind)
    for u in (-30.0, -1.0, 0.0, 0.4, 5.0):
        assert rs.containment(u) == pytest.approx(want(u), abs=1e-11)


def test_shrunk_set_is_smaller():
    rs = RandomSetSpec("cdf-centered", shrink=0.5)
    u = 0.5
    assert rs.containment(u) == pytest.approx(max(0.0, 1 - abs(2 * F(u) - 1) / 0.5), abs=1e-12)
    assert rs.containment(100.0) == 0.0


def test_spec_validation():
    with pytest.raises(DomainError):
        RandomSetSpec("ball")
    with pytest.raises(DomainError):
        RandomSetSpec("cdf-centered", shrink=0.0)


interval_ends = st.floats(-20, 20, allow_nan=False)


@given(st.sampled_from(SET_KINDS), interval_ends, interval_ends)
def test_belief_below_plausibility_and_duality(kind, a, b):
    # closed intervals cannot express the complement of a single point
    assume(a != b)
    a, b = min(a, b), max(a, b)
    rs = RandomSetSpec(kind)
    iv = np.array([[a, b]])
    bel, pl = rs.belief_of(iv), rs.plausibility_of(iv)
    assert -1e-12 <= bel <= pl + 1e-12 <= 1 + 2e-12
    comp = np.array([[-np.inf, a], [b, np.inf]])
    assert rs.belief_of(comp) == pytest.approx(1.0 - pl, abs=1e-10)


@pytest.mark.parametrize("kind", SET_KINDS)
def test_exact_matches_monte_carlo(kind):
    rs = RandomSetSpec(kind)
    iv = np.array([[-0.5, 2.0]])
    bel, pl = rs.belief_of(iv), rs.plausibility_of(iv)
    draws = 40_000
    mbel, mpl = rs.monte_carlo(iv, draws, seed=3)
    se = 0.5 / math.sqrt(draws)
    assert abs(mbel - bel) < 5 * se
    assert abs(mpl - pl) < 5 * se


def test_basic_example_closed_form():
    mu = np.linspace(-10, 10, 401)
    pl = basic_plausibility(0.0, mu)
    assert np.max(np.abs(pl - 2 * F(-np.abs(mu)))) < 1e-14
    assert basic_plausibility(0.0, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert basic_plausibility(0.0, 0.0) == 1.0


def test_basic_through_engine():
    bel, pl = belief_and_plausibility(basic_map(2.0, 3.0), Assertion.singleton(4.0),
                                      RandomSetSpec("cdf-centered"))
    assert bel == 0.0
    assert pl == pytest.approx(2 * F(-2.0 / 3.0), abs=1e-11)
    # mu <= 2 holds exactly when U >= 0
    bel, pl = belief_and_plausibility(basic_map(2.0), Assertion.at_most(2.0),
                                      RandomSetSpec("one-sided-upper"))
    assert pl == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("level", [0.5, 0.9, 0.95])
def test_basic_interval_closed_form(level):
    x, sigma = 1.0, 2.0
    curve = curve_from_function(lambda m: basic_plausibility(x, m, sigma), np.linspace(-5, 7, 49))
    lo, hi = plausibility_interval(curve, level)
    half = sigma * math.tan(math.pi * level / 2)
    assert lo == pytest.approx(x - half, abs=1e-9)
    assert hi == pytest.approx(x + half, abs=1e-9)


@pytest.mark.parametrize("kind", SET_KINDS)
def test_plausible_region_boundary(kind):
    rs = RandomSetSpec(kind)
    reg = rs.plausible_region(0.9)
    for a, b in reg:
        for end in (a, b):
            if np.isfinite(end):
                assert rs.containment(end) == pytest.approx(0.1, abs=1e-9)
        if np.isfinite(a) and np.isfinite(b):
            assert rs.containment(0.5 * (a + b)) > 0.1


def test_validity_check_detects_invalid_set():
    ok = validity_check(RandomSetSpec("cdf-centered"), n_sim=5000, seed=1)
    bad = validity_check(RandomSetSpec("cdf-centered", shrink=0.5), n_sim=5000, seed=1)
    assert ok.dominance_ok and ok.uniform_ok
    assert not bad.dominance_ok
    with pytest.raises(DomainError):
        validity_check(RandomSetSpec(), n_sim=10)


def test_assertions():
    with pytest.raises(DomainError):
        Assertion("interval", 2.0, 1.0)
    with pytest.raises(DomainError):
        Assertion("singleton", 0.0, 1.0)
    with pytest.raises(CapabilityError):
        Assertion.rectangle((0, 1), (1, 2)).intervals()
    assert Assertion.everything().kind == "everything"
    assert np.array_equal(Assertion.interval(0, 1).complement_intervals(),
                          np.array([[-np.inf, 0.0], [1.0, np.inf]]))


@given(st.floats(-10, 10), st.floats(0.1, 10))
def test_monotone_map_roundtrip(x, sigma):
    m = basic_map(x, sigma)
    iv = np.array([[-1.0, 0.5], [2.0, 3.0]])
    back = m.preimage(m.image(iv))
    assert np.allclose(np.sort(back, axis=0), iv, atol=1e-9)


def test_map_without_inverse():
    with pytest.raises(CapabilityError):
        MonotoneMap(lambda t: t).preimage([[0, 1]])


def test_curve_validation_and_empty_interval():
    with pytest.raises(DomainError):
        PlausibilityCurve(np.arange(3.0), np.array([0.1, 1.2, 0.3]))
    curve = PlausibilityCurve(np.arange(3.0), np.array([0.01, 0.02, 0.01]))
    with pytest.raises(EmptyIntervalError):
        plausibility_interval(curve, 0.95)
    with pytest.raises(DomainError):
        curve_from_function(lambda v: 0.5, [1.0, 0.0])
