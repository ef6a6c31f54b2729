"""Point estimators and Bayesian posteriors for Cauchy samples.

These serve two purposes: classical comparators (mean, trimmed mean,
Pitman estimator, MLE, profile-likelihood multimodality) and independent
oracles for the IM/Bayes correspondences. The Pitman-prior marginals are
computed with scipy's QUADPACK routines rather than the package's own
rules so that agreement is a genuine cross-check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sci_integrate
from scipy.optimize import brentq

from .cauchy import rng_for
from .errors import DegenerateDataError, DomainError, OptimizationError
from .quadrature import GridDensity, integrate, normalize

__all__ = [
    "log_likelihood",
    "sample_mean",
    "trimmed_mean",
    "pitman_estimator",
    "MLEResult",
    "mle_joint",
    "LikelihoodLandscape",
    "profile_landscape_mu",
    "bayes_posterior_mu_flat",
    "posterior_mu_marginal",
    "pitman_posterior_marginals",
]


def _data(data, min_n=1):
    x = np.asarray(data, dtype=float).ravel()
    if x.size < min_n:
        raise DomainError(f"need at least {min_n} observation(s), got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError("data must be finite")
    return x


def log_likelihood(data, mu, sigma):
    """sum_i log f(x_i; mu, sigma), broadcasting over mu and sigma."""
    x = _data(data)
    mu = np.asarray(mu, dtype=float)[..., None]
    sigma = np.asarray(sigma, dtype=float)[..., None]
    z = (x - mu) / sigma
    out = np.sum(-math.log(math.pi) - np.log(sigma) - np.log1p(z * z), axis=-1)
    return out if out.ndim else float(out)


def sample_mean(data) -> float:
    """Arithmetic mean. Itself C(mu, sigma) distributed, so no better than one draw."""
    return float(np.mean(_data(data)))


def trimmed_mean(data, trim_fraction: float) -> float:
    """Mean after dropping floor(trim_fraction * n) points from each end."""
    if not 0 <= trim_fraction < 0.5:
        raise DomainError("trim_fraction must lie in [0, 0.5)")
    x = np.sort(_data(data))
    k = int(math.floor(trim_fraction * x.size))
    return float(np.mean(x[k:x.size - k]))


def pitman_estimator(data, sigma_known: float = 1.0) -> float:
    """Flat-prior posterior mean of mu with sigma known.

    Ratio of int u L(u) du to int L(u) du, both over the real line; the
    numerator diverges for a single observation.
    """
    x = _data(data)
    if x.size <= 1:
        raise DomainError("the Pitman estimator needs n > 1")
    if not sigma_known > 0:
        raise DomainError("sigma_known must be positive")
    ref = float(np.median(x))
    # centre at the median and rescale to keep the integrand near 1
    shift = max(float(log_likelihood(x, v, sigma_known)) for v in x)

    def lik(u):
        return np.exp(log_likelihood(x, u, sigma_known) - shift)

    pts = tuple(x)
    den = integrate(lik, points=pts, scale=sigma_known, rtol=1e-13).value
    num = integrate(lambda u: (u - ref) * lik(u), points=pts, scale=sigma_known, rtol=1e-13,
                    atol=1e-15 * den * sigma_known).value
    return ref + num / den


# ---------------------------------------------------------------------------
# maximum likelihood


@dataclass(frozen=True)
class MLEResult:
    """Joint MLE; unpacks as (mu_hat, sigma_hat, log_likelihood).

    ``optima`` holds the (mu, sigma) reached from each start and
    ``gradient`` the score at the reported optimum in (mu, sigma).
    """

    mu: float
    sigma: float
    log_likelihood: float
    optima: np.ndarray = field(repr=False, compare=False)
    gradient: np.ndarray = field(repr=False, compare=False)
    iterations: int = 0

    def __iter__(self):
        return iter((self.mu, self.sigma, self.log_likelihood))

    @property
    def spread(self) -> float:
        """Largest pairwise distance between the per-start optima."""
        o = self.optima
        d = o[:, None, :] - o[None, :, :]
        return float(np.sqrt((d * d).sum(-1)).max())


def _score_hessian(x, mu, tau):
    """Score and Hessian of the log-likelihood in (mu, tau = log sigma)."""
    sig = math.exp(tau)
    z = (x - mu) / sig
    r = 1.0 + z * z
    g_mu = 2.0 / sig * np.sum(z / r)
    g_tau = np.sum((z * z - 1.0) / r)
    h_mm = -2.0 / sig ** 2 * np.sum((1.0 - z * z) / (r * r))
    h_mt = -4.0 / sig * np.sum(z / (r * r))
    h_tt = -4.0 * np.sum(z * z / (r * r))
    return np.array([g_mu, g_tau]), np.array([[h_mm, h_mt], [h_mt, h_tt]])


def _ascend(x, mu, tau, max_iter=200, gtol=1e-11):
    trace = []
    ll = float(log_likelihood(x, mu, math.exp(tau)))
    for it in range(max_iter):
        g, h = _score_hessian(x, mu, tau)
        gn = float(np.hypot(g[0] * math.exp(tau), g[1]))
        trace.append((mu, math.exp(tau), ll, gn))
        if gn <= gtol * x.size:
            return mu, tau, ll, it, True, trace
        try:
            ev = np.linalg.eigvalsh(h)
            step = -np.linalg.solve(h, g) if ev.max() < 0 else None
        except np.linalg.LinAlgError:
            step = None
        if step is None:
            # not concave here: scaled gradient step
            step = g / max(1.0, float(np.abs(np.diag(h)).max()))
        # damp long steps, then backtrack on the likelihood
        size = float(np.hypot(step[0] / math.exp(tau), step[1]))
        if size > 1.0:
            step = step / size
        t = 1.0
        for _ in range(60):
            m2, t2 = mu + t * step[0], tau + t * step[1]
            ll2 = float(log_likelihood(x, m2, math.exp(t2)))
            if ll2 >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        else:
            return mu, tau, ll, it, gn <= 1e-6, trace
        mu, tau, ll = m2, t2, ll2
    return mu, tau, ll, max_iter, False, trace


def mle_joint(data, starts: int = 20, seed=0) -> MLEResult:
    """Maximize the joint likelihood of (mu, sigma) by damped Newton steps.

    Newton runs in (mu, log sigma) with backtracking, falling back to a
    scaled gradient step where the Hessian is not negative definite.
    ``starts`` - 1 random starts around (median, half-IQR) are added to
    the median start; for n > 3 they should all reach one optimum.
    """
    x = _data(data)
    if x.size < 3:
        raise DegenerateDataError("joint MLE needs n >= 3")
    if np.all(x == x[0]):
        raise DegenerateDataError("degenerate sample: all observations equal")
    med = float(np.median(x))
    q1, q3 = np.percentile(x, [25, 75])
    scale = float(q3 - q1) / 2.0 or float(np.std(x)) or 1.0
    rng = rng_for(seed, 0)
    inits = [(med, math.log(scale))]
    for _ in range(starts - 1):
        inits.append((med + scale * rng.standard_cauchy() * 0.5,
                      math.log(scale) + rng.normal(0.0, 1.0)))
    ends, traces, iters = [], [], 0
    best = None
    for m0, t0 in inits:
        mu, tau, ll, it, ok, tr = _ascend(x, m0, t0)
        iters += it
        traces.append(tr)
        if ok:
            ends.append((mu, math.exp(tau)))
            if best is None or ll > best[2]:
                best = (mu, tau, ll)
    if best is None:
        raise OptimizationError("no start converged", trace=traces)
    mu, tau, ll = best
    g, _ = _score_hessian(x, mu, tau)
    sig = math.exp(tau)
    # back to (mu, sigma): d/dsigma = (d/dtau)/sigma
    grad = np.array([g[0], g[1] / sig])
    return MLEResult(float(mu), float(sig), float(ll), np.array(ends), grad, iters)


# ---------------------------------------------------------------------------
# profile likelihood in mu


@dataclass(frozen=True)
class LikelihoodLandscape:
    """Log-likelihood of mu at fixed sigma, with its strict local maxima."""

    grid: np.ndarray
    values: np.ndarray
    maxima: np.ndarray
    max_values: np.ndarray
    sigma: float

    @property
    def global_max(self) -> float:
        return float(self.maxima[int(np.argmax(self.max_values))])

    @property
    def n_nonglobal(self) -> int:
        return int(self.maxima.size - 1)


def _profile_score(x, mu, sigma):
    d = x - np.asarray(mu, dtype=float)[..., None]
    return np.sum(2.0 * d / (sigma * sigma + d * d), axis=-1)


def _default_grid(x, sigma, per_sigma=16):
    # each term is convex more than sigma from its data point, so every
    # local maximum lies within sigma of some observation
    h = sigma / per_sigma
    lo = np.sort(x) - 2.0 * sigma
    hi = np.sort(x) + 2.0 * sigma
    # merge overlapping windows
    starts, ends = [lo[0]], [hi[0]]
    for a, b in zip(lo[1:], hi[1:]):
        if a <= ends[-1]:
            ends[-1] = max(ends[-1], b)
        else:
            starts.append(a)
            ends.append(b)
    pieces = [np.linspace(a, b, int(math.ceil((b - a) / h)) + 1) for a, b in zip(starts, ends)]
    return pieces


def profile_landscape_mu(data, sigma_fixed: float, grid=None) -> LikelihoodLandscape:
    """Profile log-likelihood over mu at fixed sigma and all its strict local maxima.

    Maxima are located as +/- sign changes of the analytic score between
    grid nodes and refined by root finding. Without ``grid``, nodes are
    placed at spacing sigma/16 in windows of half-width 2 sigma around
    the data.
    """
    x = _data(data)
    if not sigma_fixed > 0:
        raise DomainError("sigma_fixed must be positive")
    sig = float(sigma_fixed)
    if grid is None:
        pieces = _default_grid(x, sig)
    else:
        g = np.asarray(grid, dtype=float).ravel()
        if g.size < 2 or np.any(np.diff(g) <= 0):
            raise DomainError("grid must be strictly increasing with at least two points")
        pieces = [g]
    maxima = []
    for g in pieces:
        sc = _profile_score(x, g, sig)
        idx = np.flatnonzero((sc[:-1] > 0) & (sc[1:] <= 0))
        for i in idx:
            if sc[i + 1] == 0.0:
                maxima.append(g[i + 1])
                continue
            maxima.append(brentq(lambda m: float(_profile_score(x, m, sig)), g[i], g[i + 1],
                                 xtol=1e-13, rtol=4 * np.finfo(float).eps))
    maxima = np.unique(np.array(maxima, dtype=float))
    allg = np.concatenate(pieces)
    vals = np.asarray(log_likelihood(x, allg, sig))
    mv = np.asarray(log_likelihood(x, maxima, sig)) if maxima.size else np.empty(0)
    return LikelihoodLandscape(allg, vals, maxima, np.atleast_1d(mv), sig)


# ---------------------------------------------------------------------------
# posteriors


def bayes_posterior_mu_flat(data, sigma_known: float = 1.0) -> GridDensity:
    """Posterior of mu under a flat prior with sigma known."""
    x = _data(data)
    if not sigma_known > 0:
        raise DomainError("sigma_known must be positive")

    def log_f(mu):
        return log_likelihood(x, mu, sigma_known)

    return normalize(log_f, "real", center=float(np.median(x)), scale=float(sigma_known),
                     breakpoints=x)


def _quad(f, a, b):
    with warnings.catch_warnings():
        # roundoff warnings at the 1e-11 target are expected and harmless
        warnings.simplefilter("ignore", sci_integrate.IntegrationWarning)
        return sci_integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-11, limit=400)[0]


def _mu_marginal_log(x, log_prior=None):
    """Unnormalized log marginal of mu: log int exp(loglik + log_prior) dsigma.

    The integral runs over v = log sigma with ``scipy.integrate.quad_vec``,
    every mu-node shifted to its own peak so all components are O(1).
    ``log_prior(mu, sigma)`` defaults to the Pitman prior -log sigma.
    """
    xs = np.unique(x)
    med = float(np.median(x))
    spread = float(xs[-1] - xs[0])
    if log_prior is None:
        def log_prior(mu, sig):
            return -np.log(sig)

    def log_mu(mu):
        mu = np.atleast_1d(np.asarray(mu, dtype=float)).ravel()
        vg = np.linspace(-12.0, 12.0, 97)
        base = np.log(spread + np.abs(mu - med))
        sg = np.exp(base[:, None] + vg)
        lv = log_likelihood(x, mu[:, None], sg) + log_prior(mu[:, None], sg) + np.log(sg)
        k = np.argmax(lv, axis=1)
        peak = lv[np.arange(mu.size), k]
        v0 = base + vg[k]

        def f(w):
            sig = np.exp(v0 + w)
            return np.exp(log_likelihood(x, mu, sig) + log_prior(mu, sig) + v0 + w - peak)

        # the integrand falls like exp(-|w|) or faster on both sides
        lo = sci_integrate.quad_vec(f, -60.0, 0.0, epsabs=0.0, epsrel=1e-12, norm="max")[0]
        hi = sci_integrate.quad_vec(f, 0.0, 60.0, epsabs=0.0, epsrel=1e-12, norm="max")[0]
        return peak + np.log(lo + hi)

    return log_mu


def posterior_mu_marginal(data, log_prior=None) -> GridDensity:
    """Marginal posterior of mu for the joint prior exp(log_prior(mu, sigma)).

    ``log_prior`` defaults to the Pitman prior (1/sigma) dmu dsigma; it
    must leave the posterior proper.
    """
    x = _data(data, 2)
    xs = np.unique(x)
    if xs.size < 2:
        raise DegenerateDataError("degenerate sample: all observations equal")
    gap = float(np.diff(xs).min())
    return normalize(_mu_marginal_log(x, log_prior), "real", center=float(np.median(x)),
                     scale=gap, breakpoints=xs, rtol=1e-11)


def pitman_posterior_marginals(data):
    """Marginals of mu and sigma under the prior (1/sigma) dmu dsigma.

    The mu-marginal is :func:`posterior_mu_marginal`. The sigma-marginal
    splits the mu-line into one cell per observation and substitutes
    mu = x_j + sigma tan(theta) inside cell j, which absorbs that
    observation's factor; each cell is one QUADPACK call.
    """
    x = _data(data, 2)
    xs = np.unique(x)
    if xs.size < 2:
        raise DegenerateDataError("degenerate sample: all observations equal")
    spread = float(xs[-1] - xs[0])
    gap = float(np.diff(xs).min())

    cuts = np.concatenate([[-np.inf], 0.5 * (xs[1:] + xs[:-1]), [np.inf]])
    mult = np.array([np.sum(x == v) for v in xs])

    def log_sigma_node(sig):
        # inside cell j: L_j dmu = dtheta / pi, and L_j^(m_j - 1) remains
        logs = []
        for j, xj in enumerate(xs):
            others = np.delete(xs, j)
            om = np.delete(mult, j)
            ta = math.atan((cuts[j] - xj) / sig) if j > 0 else -math.pi / 2
            tb = math.atan((cuts[j + 1] - xj) / sig) if j < xs.size - 1 else math.pi / 2
            scale0 = float(np.sum(om * np.log(sig / (math.pi * (sig * sig + (others - xj) ** 2)))))

            def f(th, xj=xj, others=others, om=om, scale0=scale0):
                mu = xj + sig * math.tan(th)
                own = (mult[j] - 1) * math.log(math.cos(th) ** 2 / (math.pi * sig))
                rest = np.sum(om * np.log(sig / (math.pi * (sig * sig + (others - mu) ** 2))))
                return math.exp(own + rest - scale0) / math.pi

            v = _quad(f, ta, tb)
            logs.append(scale0 + math.log(v) if v > 0 else -np.inf)
        return float(np.logaddexp.reduce(logs)) - math.log(sig)

    mu_dens = posterior_mu_marginal(x)
    sig_dens = normalize(np.vectorize(log_sigma_node, otypes=[float]), "positive",
                         center=math.sqrt(gap * spread), scale=1.0, rtol=1e-11)
    return mu_dens, sig_dens
