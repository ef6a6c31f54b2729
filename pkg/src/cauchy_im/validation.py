"""Monte Carlo checks of validity, coverage and the prior-conflict example.

Every replicate draws its data from its own substream ``rng_for(seed, i)``
so results do not depend on evaluation order or on how replicates are
split into blocks.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import cauchy
from .cauchy import CauchyParams, MobiusCoeffs, rng_for
from .conditional import conditional_density_t
from .engine import RandomSetSpec, standard_cauchy_reference
from .errors import DomainError
from .estimators import bayes_posterior_mu_flat, posterior_mu_marginal
from .joint import decompose, joint_plausibility
from .marginal import (marginal_density_m, marginal_density_s, marginal_plausibility_mu,
                       marginal_plausibility_sigma, z_density)
from .reports import SimulationReport

__all__ = [
    "Scenario",
    "METHODS",
    "plausibility_at_truth",
    "uniformity_at_truth",
    "interval_coverage",
    "fiducial_conflict_demo",
    "ConflictReport",
    "implied_prior_log_ratio",
]

METHODS = (
    "basic", "conditional", "marginal-mu", "marginal-sigma", "joint",
    "bayes-flat", "bayes-pitman",
)

_ALIASES = {
    "im-conditional": "conditional",
    "im-marginal-mu": "marginal-mu",
    "im-marginal-sigma": "marginal-sigma",
}


@dataclass(frozen=True)
class Scenario:
    """Data-generating model and inference method for a simulation.

    ``method`` is one of :data:`METHODS` (case-insensitive; ``IM-`` prefixes
    are accepted). ``set_kind`` and ``shrink`` choose the random set;
    ``shrink < 1`` builds the invalid negative control.
    """

    n: int
    mu: float = 0.0
    sigma: float = 1.0
    method: str = "basic"
    level: float = 0.95
    n_sim: int = 10_000
    set_kind: str = "density-contour"
    shrink: float = 1.0

    def __post_init__(self):
        m = str(self.method).lower()
        m = _ALIASES.get(m, m)
        if m not in METHODS:
            raise DomainError(f"unknown method {self.method!r}; expected one of {METHODS}")
        object.__setattr__(self, "method", m)
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        if m == "basic" and self.n != 1:
            raise DomainError("the basic IM uses a single observation (n = 1)")
        if m in ("marginal-mu", "marginal-sigma", "joint", "bayes-pitman") and self.n < 2:
            raise DomainError(f"method {m!r} needs n >= 2")
        if not (self.sigma > 0 and math.isfinite(self.sigma) and math.isfinite(self.mu)):
            raise DomainError("need finite mu and positive finite sigma")
        if not 0 < self.level < 1:
            raise DomainError("level must lie in (0, 1)")
        if int(self.n_sim) != self.n_sim or self.n_sim < 1:
            raise DomainError("n_sim must be a positive integer")
        object.__setattr__(self, "n_sim", int(self.n_sim))
        RandomSetSpec(self.set_kind, standard_cauchy_reference(), self.shrink)

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise DomainError(f"unknown scenario keys: {sorted(extra)}")
        if "n" not in known:
            raise DomainError("scenario needs 'n'")
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def params(self) -> CauchyParams:
        return CauchyParams(self.mu, self.sigma)

    def random_set(self, reference=None) -> RandomSetSpec:
        return RandomSetSpec(self.set_kind, reference, self.shrink)


def _replicate(scenario: Scenario, seed, i):
    return cauchy.sample(scenario.n, scenario.params, rng=rng_for(seed, i))


def _posterior_pl(dens, value):
    # equal-tailed analogue of a plausibility: 1 - |2F - 1|
    return float(1.0 - abs(2.0 * dens.cdf(value) - 1.0))


def plausibility_at_truth(scenario: Scenario, x) -> float:
    """Plausibility of the true parameter under the scenario's method.

    For ``joint`` the truth is the pair (mu, sigma); for ``marginal-sigma``
    it is sigma; otherwise mu. Bayes methods return 1 - |2F(mu) - 1| with
    F the posterior cdf, which has the same coverage semantics.
    """
    sc = scenario
    m = sc.method
    if m == "basic":
        rs = sc.random_set(standard_cauchy_reference())
        return float(rs.containment((x[0] - sc.mu) / sc.sigma))
    if m == "conditional":
        dens = conditional_density_t(x, sc.sigma)
        return float(sc.random_set(dens).containment((x[0] - sc.mu) / sc.sigma))
    if m == "marginal-mu":
        dens = marginal_density_m(decompose(x)).density
        return float(marginal_plausibility_mu(x, sc.mu, sc.random_set(dens), density=dens))
    if m == "marginal-sigma":
        dens = marginal_density_s(decompose(x)).density
        return float(marginal_plausibility_sigma(x, sc.sigma, sc.random_set(dens), density=dens))
    if m == "joint":
        if sc.set_kind != "density-contour" or sc.shrink != 1.0:
            raise DomainError("the joint IM supports the density-contour set only")
        return float(joint_plausibility(x, sc.mu, sc.sigma))
    if m == "bayes-flat":
        return _posterior_pl(bayes_posterior_mu_flat(x, sc.sigma), sc.mu)
    return _posterior_pl(posterior_mu_marginal(x), sc.mu)


def _block(args):
    scenario, seed, start, stop = args
    return [plausibility_at_truth(scenario, _replicate(scenario, seed, i)) for i in range(start, stop)]


def _run(scenario: Scenario, seed, n_sim, level, alpha, workers=1):
    t0 = time.perf_counter()
    if workers is None or workers <= 1:
        q = np.array(_block((scenario, seed, 0, n_sim)))
    else:
        # blocks are reassembled in replicate order, so workers cannot change the result
        edges = np.linspace(0, n_sim, 4 * workers + 1).astype(int)
        jobs = [(scenario, seed, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            q = np.concatenate([np.asarray(v, dtype=float) for v in pool.map(_block, jobs)])
    desc = scenario.to_dict()
    desc["n_sim"] = n_sim
    return SimulationReport.from_values(desc, q, seed, level=level, alpha=alpha,
                                        runtime=time.perf_counter() - t0)


def uniformity_at_truth(scenario: Scenario, n_sim=None, seed=0, alpha=0.01,
                        workers=1) -> SimulationReport:
    """Simulate data at the truth and test pl(truth) against U(0, 1).

    The one-sided test checks validity (P(pl <= a) <= a); the two-sided
    test checks exactness. ``n_sim`` defaults to ``scenario.n_sim``;
    ``workers > 1`` spreads replicates over processes without changing
    the result.
    """
    n_sim = scenario.n_sim if n_sim is None else int(n_sim)
    if n_sim < 1000:
        raise DomainError("n_sim must be at least 1000")
    return _run(scenario, seed, n_sim, scenario.level, alpha, workers)


def interval_coverage(scenario: Scenario, level=None, n_sim=None, seed=0,
                      alpha=0.01, workers=1) -> SimulationReport:
    """Coverage of level-``level`` intervals at the truth.

    For IM methods the plausibility interval {theta : pl(theta) > 1 - level}
    covers the truth exactly when pl(truth) > 1 - level; for Bayes methods
    the equal-tailed credible interval does so under the same rule.
    """
    level = scenario.level if level is None else float(level)
    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    n_sim = scenario.n_sim if n_sim is None else int(n_sim)
    if n_sim < 1:
        raise DomainError("n_sim must be positive")
    return _run(scenario, seed, n_sim, level, alpha, workers)


# ---------------------------------------------------------------------------
# the reciprocal-data conflict


@dataclass(frozen=True)
class ConflictReport:
    """mu-inference from the data directly and through transformed data.

    ``direct`` is the equal-tailed level interval of the Pitman-prior
    marginal of mu. ``transformed`` is the same interval when the Pitman
    prior is placed on theta* = (a theta + b)/(c theta + d) and the
    posterior is carried back to (mu, sigma). ``transformed_raw`` is the
    interval for mu* itself from the transformed data. ``prior_log_ratio``
    is the log ratio of the two priors on the (mu, sigma) points of
    ``ratio_grid``; for the reciprocal map it equals -log(mu^2 + sigma^2).
    """

    level: float
    coeffs: tuple
    direct: tuple
    transformed: tuple
    transformed_raw: tuple
    ratio_grid: np.ndarray = field(repr=False)
    prior_log_ratio: np.ndarray = field(repr=False)

    @property
    def discrepancy(self) -> float:
        """Largest endpoint difference between ``direct`` and ``transformed``."""
        return float(max(abs(self.direct[0] - self.transformed[0]),
                         abs(self.direct[1] - self.transformed[1])))

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "coeffs": list(self.coeffs),
            "direct": list(self.direct),
            "transformed": list(self.transformed),
            "transformed_raw": list(self.transformed_raw),
            "discrepancy": self.discrepancy,
        }


def implied_prior_log_ratio(coeffs: MobiusCoeffs, mu, sigma):
    """log of (Pitman prior on theta*, pulled back to (mu, sigma)) over (Pitman prior on theta).

    With theta* = (a theta + b)/(c theta + d), the map is conformal with
    |dtheta*/dtheta| = |det| / |c theta + d|^2, so dmu* dsigma* picks up
    that factor squared while sigma* = sigma |det| / |c theta + d|^2.
    The ratio is therefore |det| / |c theta + d|^2.
    """
    a, b, c, d = coeffs.a, coeffs.b, coeffs.c, coeffs.d
    det = abs(a * d - b * c)
    th = np.asarray(mu, dtype=float) + 1j * np.asarray(sigma, dtype=float)
    return math.log(det) - 2.0 * np.log(np.abs(c * th + d))


def fiducial_conflict_demo(data, level=0.95, coeffs: MobiusCoeffs = MobiusCoeffs(0, 1, 1, 0),
                           grid_size=9) -> ConflictReport:
    """Compare Pitman-prior mu-intervals built on theta and on theta*.

    The transformed data R_i = (a X_i + b)/(c X_i + d) are Cauchy with
    parameter theta*, and their likelihood in theta* is the likelihood of
    X in theta up to a constant. Putting the Pitman prior on theta* and
    carrying the posterior back to theta is therefore the theta-posterior
    under the pulled-back prior, whose ratio to the Pitman prior is
    :func:`implied_prior_log_ratio`. Both mu-marginals use one quadrature
    path, so the identity map reproduces ``direct`` exactly.
    """
    x = np.asarray(data, dtype=float).ravel()
    if x.size < 2:
        raise DomainError("need n >= 2")
    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    r = cauchy.transform_data(x, coeffs)
    tail = 0.5 * (1.0 - level)

    def log_pitman(mu, sig):
        return -np.log(sig)

    def log_pulled(mu, sig):
        return -np.log(sig) + implied_prior_log_ratio(coeffs, mu, sig)

    d_dir = posterior_mu_marginal(x, log_pitman)
    d_tr = posterior_mu_marginal(x, log_pulled)
    direct = (float(d_dir.quantile(tail)), float(d_dir.quantile(1.0 - tail)))
    transformed = (float(d_tr.quantile(tail)), float(d_tr.quantile(1.0 - tail)))
    zr = z_density(r).density
    raw = (float(zr.quantile(tail)), float(zr.quantile(1.0 - tail)))

    mus = np.linspace(direct[0], direct[1], grid_size)
    spread = float(np.median(np.abs(x - np.median(x)))) or 1.0
    sig = np.geomspace(0.25, 4.0, grid_size) * spread
    M, S = np.meshgrid(mus, sig, indexing="ij")
    ratio = implied_prior_log_ratio(coeffs, M, S)
    return ConflictReport(float(level), (coeffs.a, coeffs.b, coeffs.c, coeffs.d), direct,
                          transformed, raw, np.stack([M, S], axis=-1), ratio)
