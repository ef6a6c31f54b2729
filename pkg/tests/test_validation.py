import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cauchy_im import cauchy
from cauchy_im.cauchy import MobiusCoeffs
from cauchy_im.errors import DomainError
from cauchy_im.validation import (Scenario, fiducial_conflict_demo, implied_prior_log_ratio,
                                  interval_coverage, plausibility_at_truth, uniformity_at_truth)


def test_scenario_normalizes_method_and_validates():
    sc = Scenario(n=3, method="IM-Conditional")
    assert sc.method == "conditional"
    for bad in ({"n": 2, "method": "basic"}, {"n": 1, "method": "joint"}, {"n": 3, "method": "nope"},
                {"n": 3, "method": "conditional", "sigma": -1.0}, {"n": 0},
                {"n": 1, "level": 1.0}, {"n": 1, "shrink": 0.0}, {"n": 1, "set_kind": "ball"}):
        with pytest.raises(DomainError):
            Scenario(**bad)


def test_scenario_dict_roundtrip():
    sc = Scenario(n=4, mu=1.0, sigma=2.0, method="marginal-mu", level=0.9, n_sim=2000)
    assert Scenario.from_dict(sc.to_dict()) == sc
    with pytest.raises(DomainError, match="unknown scenario keys"):
        Scenario.from_dict({"n": 3, "method": "conditional", "colour": "red"})
    with pytest.raises(DomainError, match="needs 'n'"):
        Scenario.from_dict({"method": "basic"})


def test_basic_plausibility_at_truth_closed_form():
    sc = Scenario(n=1, mu=2.0, sigma=3.0)
    u = (5.0 - 2.0) / 3.0
    assert plausibility_at_truth(sc, np.array([5.0])) == pytest.approx(
        2 * (0.5 - math.atan(u) / math.pi), abs=1e-12)


def test_report_is_deterministic_and_worker_independent():
    sc = Scenario(n=1, n_sim=1000)
    a = uniformity_at_truth(sc, seed=4)
    b = uniformity_at_truth(sc, seed=4)
    c = uniformity_at_truth(sc, seed=4, workers=2)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.values, c.values)
    assert a.ks_pvalue == c.ks_pvalue
    assert not np.array_equal(a.values, uniformity_at_truth(sc, seed=5).values)


def test_basic_and_conditional_uniform_at_truth():
    for sc in (Scenario(n=1, mu=3.0, sigma=0.5, n_sim=4000),
               Scenario(n=3, method="conditional", set_kind="cdf-centered", n_sim=1000)):
        rep = uniformity_at_truth(sc, seed=1)
        assert rep.ks_pvalue > 0.001 and rep.dominance_ok


def test_marginal_sigma_coverage():
    sc = Scenario(n=4, sigma=2.0, method="marginal-sigma", set_kind="cdf-centered", n_sim=1000)
    rep = interval_coverage(sc, level=0.9, seed=2)
    assert abs(rep.coverage - 0.9) < 4 * math.sqrt(0.09 / 1000)


def test_negative_control_fails_dominance():
    sc = Scenario(n=1, set_kind="cdf-centered", shrink=0.5, n_sim=2000)
    rep = uniformity_at_truth(sc, seed=0)
    assert not rep.dominance_ok
    assert rep.coverage < 0.9


def test_uniformity_needs_enough_replicates():
    with pytest.raises(DomainError):
        uniformity_at_truth(Scenario(n=1), n_sim=100)
    with pytest.raises(DomainError):
        interval_coverage(Scenario(n=1), level=1.2, n_sim=100)


def _pulled_back_ratio(coeffs, mu, sigma, h=1e-6):
    # prior 1/sigma* on theta*, pulled back by a finite-difference Jacobian, over 1/sigma
    def fwd(m, s):
        th = complex(m, s)
        v = (coeffs.a * th + coeffs.b) / (coeffs.c * th + coeffs.d)
        return np.array([v.real, abs(v.imag)])

    jac = np.column_stack([(fwd(mu + h, sigma) - fwd(mu - h, sigma)) / (2 * h),
                           (fwd(mu, sigma + h) - fwd(mu, sigma - h)) / (2 * h)])
    s_star = fwd(mu, sigma)[1]
    return math.log(abs(np.linalg.det(jac)) / s_star * sigma)


@settings(max_examples=25)
@given(st.floats(-5, 5), st.floats(0.1, 5),
       st.sampled_from([MobiusCoeffs(0, 1, 1, 0), MobiusCoeffs(2, 1, 1, 3), MobiusCoeffs(1, -2, 3, 0.5)]))
def test_implied_prior_ratio_against_jacobian(mu, sigma, coeffs):
    got = float(implied_prior_log_ratio(coeffs, mu, sigma))
    assert got == pytest.approx(_pulled_back_ratio(coeffs, mu, sigma), abs=1e-6)


def test_reciprocal_ratio_closed_form():
    mu = np.array([-2.0, 0.0, 1.5])
    sig = np.array([0.5, 1.0, 3.0])
    assert np.allclose(implied_prior_log_ratio(MobiusCoeffs(0, 1, 1, 0), mu, sig),
                       -np.log(mu ** 2 + sig ** 2), atol=1e-14)


def test_conflict_demo():
    x = cauchy.sample(6, cauchy.CauchyParams(1.0, 0.5), seed=12)
    rep = fiducial_conflict_demo(x)
    assert rep.discrepancy > 1e-3
    assert rep.direct[0] < rep.direct[1] and rep.transformed[0] < rep.transformed[1]
    same = fiducial_conflict_demo(x, coeffs=MobiusCoeffs(1, 0, 0, 1))
    assert same.discrepancy == 0.0
    assert np.all(same.prior_log_ratio == 0.0)
    assert set(rep.to_dict()) == {"level", "coeffs", "direct", "transformed", "transformed_raw",
                                  "discrepancy"}
    with pytest.raises(DomainError):
        fiducial_conflict_demo([1.0])
