"""Belief and plausibility calculus for nested predictive random sets.

A one-parameter association is reduced to a monotone map ``theta -> u``
from the parameter to the auxiliary variable. An assertion on theta is
then an interval (or union of intervals) in auxiliary space, and belief
and plausibility follow from the law of the random set.

Four nested random-set families are supported, all expressed through the
reference distribution F of the auxiliary variable (p = F(u)):

``cdf-centered``
    {u : |F(u) - 1/2| <= shrink * |F(U) - 1/2|}; ``shrink < 1`` gives a
    deliberately too-small (invalid) family used as a negative control.
``one-sided-lower``
    [U, inf)
``one-sided-upper``
    (-inf, U]
``density-contour``
    {u : f(u) >= f(U)}
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import cauchy
from .errors import CapabilityError, DomainError, EmptyIntervalError
from .quadrature import GridDensity, invert_monotone, normalize
from .reports import SimulationReport

__all__ = [
    "SET_KINDS",
    "RandomSetSpec",
    "Assertion",
    "MonotoneMap",
    "PlausibilityCurve",
    "standard_cauchy_reference",
    "basic_plausibility",
    "basic_map",
    "belief_and_plausibility",
    "plausibility_interval",
    "validity_check",
    "as_random_set",
    "curve_from_function",
]

SET_KINDS = ("cdf-centered", "one-sided-lower", "one-sided-upper", "density-contour")


@functools.lru_cache(maxsize=1)
def standard_cauchy_reference() -> GridDensity:
    return normalize(lambda u: -np.log1p(u * u), "real")


@dataclass(frozen=True)
class RandomSetSpec:
    """A nested predictive random set family.

    Parameters
    ----------
    kind : str
        One of :data:`SET_KINDS`.
    reference : GridDensity, optional
        Law of the auxiliary variable. Defaults to the standard Cauchy.
    shrink : float
        Radius multiplier for ``cdf-centered`` sets; 1 gives the valid family.
    """

    kind: str = "density-contour"
    reference: Optional[GridDensity] = field(default=None, compare=False, repr=False)
    shrink: float = 1.0

    def __post_init__(self):
        if self.kind not in SET_KINDS:
            raise DomainError(f"unknown random-set kind {self.kind!r}; expected one of {SET_KINDS}")
        if not self.shrink > 0:
            raise DomainError("shrink must be positive")
        if self.reference is None:
            object.__setattr__(self, "reference", standard_cauchy_reference())

    def with_reference(self, reference: GridDensity) -> "RandomSetSpec":
        return RandomSetSpec(self.kind, reference, self.shrink)

    # -- singleton containment ----------------------------------------------
    def containment(self, u0):
        """P(u0 in S), i.e. the plausibility of the auxiliary point ``u0``."""
        u0 = np.asarray(u0, dtype=float)
        ref = self.reference
        if self.kind == "density-contour":
            out = np.array([ref.contour_plausibility(v) for v in u0.ravel()]).reshape(u0.shape)
        else:
            p = np.asarray(ref.cdf(u0), dtype=float)
            if self.kind == "cdf-centered":
                out = np.clip(1.0 - np.abs(2.0 * p - 1.0) / self.shrink, 0.0, 1.0)
            elif self.kind == "one-sided-lower":
                out = p
            else:
                out = 1.0 - p
        return out if out.ndim else float(out)

    # -- unions of auxiliary intervals ----------------------------------------
    def plausibility_of(self, intervals) -> float:
        """P(S meets the union of ``intervals``) for disjoint u-intervals."""
        iv = _as_intervals(intervals)
        if iv.size == 0:
            return 0.0
        ref = self.reference
        if self.kind == "density-contour":
            top = max(ref.max_logpdf(a, b) for a, b in iv)
            return float(ref.mass_below(top)) if np.isfinite(top) else 0.0
        pa, pb = ref.cdf(iv[:, 0]), ref.cdf(iv[:, 1])
        if self.kind == "cdf-centered":
            d = np.where(pb < 0.5, 0.5 - pb, np.where(pa > 0.5, pa - 0.5, 0.0))
            return float(np.clip(1.0 - 2.0 * d.min() / self.shrink, 0.0, 1.0))
        if self.kind == "one-sided-lower":
            return float(pb.max())
        return float(1.0 - pa.min())

    def belief_of(self, intervals) -> float:
        """P(S is contained in the union of ``intervals``)."""
        iv = _as_intervals(intervals)
        if iv.size == 0:
            return 0.0
        if self.kind == "density-contour":
            return 1.0 - self.plausibility_of(_complement(iv))
        ref = self.reference
        pa, pb = ref.cdf(iv[:, 0]), ref.cdf(iv[:, 1])
        lo_open = iv[:, 0] == -np.inf
        hi_open = iv[:, 1] == np.inf
        if self.kind == "cdf-centered":
            inside = (pa <= 0.5) & (pb >= 0.5)
            if not np.any(inside):
                return 0.0
            k = np.flatnonzero(inside)[0]
            m = min(math.inf if lo_open[k] else 0.5 - pa[k], math.inf if hi_open[k] else pb[k] - 0.5)
            return float(min(1.0, 2.0 * m / self.shrink))
        if self.kind == "one-sided-lower":
            return float(1.0 - pa[hi_open].min()) if np.any(hi_open) else 0.0
        return float(pb[lo_open].max()) if np.any(lo_open) else 0.0

    def plausible_region(self, level: float):
        """Auxiliary intervals {u : containment(u) > 1 - level}.

        Ends at the edge of the reference support are reported as the
        support bound itself (0 or -inf on the left, inf on the right).
        """
        if not 0 < level < 1:
            raise DomainError("level must lie in (0, 1)")
        ref = self.reference
        low = 0.0 if ref.domain == "positive" else -math.inf
        if self.kind == "density-contour":
            c = ref.level_for_mass_below(1.0 - level)
            xi = ref.superlevel_intervals(c)
            out = ref._to_x(xi)
            out[xi == ref.edges[0]] = low
            out[xi == ref.edges[-1]] = math.inf
            return out
        if self.kind == "cdf-centered":
            r = min(0.5, 0.5 * self.shrink * level)
            pa, pb = 0.5 - r, 0.5 + r
        elif self.kind == "one-sided-lower":
            pa, pb = 1.0 - level, 1.0
        else:
            pa, pb = 0.0, level
        a = low if pa <= 0 else float(ref.quantile(pa))
        b = math.inf if pb >= 1 else float(ref.quantile(pb))
        return np.array([[a, b]])

    # -- Monte Carlo path -------------------------------------------------------
    def monte_carlo(self, intervals, draws: int, seed=0):
        """(belief, plausibility) from ``draws`` realizations of the random set."""
        iv = _as_intervals(intervals)
        ref = self.reference
        rng = cauchy.rng_for(seed, 0)
        if iv.size == 0:
            return 0.0, 0.0
        if self.kind == "density-contour":
            lf = ref.logpdf(ref.sample(draws, rng))
            sup_a = max(ref.max_logpdf(a, b) for a, b in iv)
            comp = _complement(iv)
            sup_c = max((ref.max_logpdf(a, b) for a, b in comp), default=-np.inf)
            pl = np.mean(lf <= sup_a)
            bel = np.mean(lf > sup_c)
            return float(bel), float(pl)
        p = rng.random(draws)
        if self.kind == "cdf-centered":
            r = self.shrink * np.abs(p - 0.5)
            lo, hi = 0.5 - r, 0.5 + r
        elif self.kind == "one-sided-lower":
            lo, hi = p, np.full(draws, np.inf)
        else:
            lo, hi = np.full(draws, -np.inf), p
        pa = ref.cdf(iv[:, 0])
        pb = ref.cdf(iv[:, 1])
        # p-space images of the components; open ends extend past [0, 1]
        pa = np.where(iv[:, 0] == -np.inf, -np.inf, pa)
        pb = np.where(iv[:, 1] == np.inf, np.inf, pb)
        meets = (lo[:, None] <= pb) & (hi[:, None] >= pa)
        inside = (lo[:, None] >= pa) & (hi[:, None] <= pb)
        return float(inside.any(axis=1).mean()), float(meets.any(axis=1).mean())


def _as_intervals(intervals):
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    if np.any(iv[:, 0] > iv[:, 1]):
        raise DomainError("interval lower bound exceeds upper bound")
    return iv[np.argsort(iv[:, 0])]


def _complement(iv):
    out = []
    prev = -np.inf
    for a, b in iv:
        if a > prev:
            out.append((prev, a))
        prev = max(prev, b)
    if prev < np.inf:
        out.append((prev, np.inf))
    return np.array(out, dtype=float).reshape(-1, 2)


@dataclass(frozen=True)
class Assertion:
    """A subset of the parameter space.

    ``kind`` is one of ``singleton``, ``interval`` (closed, possibly with
    infinite ends, covering the one-sided cases), ``rectangle`` (in
    (mu, sigma)) or ``everything``.
    """

    kind: str
    lower: float = -math.inf
    upper: float = math.inf
    sigma_lower: float = 0.0
    sigma_upper: float = math.inf

    def __post_init__(self):
        if self.kind not in ("singleton", "interval", "rectangle", "everything"):
            raise DomainError(f"unknown assertion kind {self.kind!r}")
        if self.lower > self.upper or self.sigma_lower > self.sigma_upper:
            raise DomainError("assertion bounds are reversed")
        if self.kind == "singleton" and self.lower != self.upper:
            raise DomainError("singleton needs lower == upper")

    @classmethod
    def singleton(cls, value):
        return cls("singleton", float(value), float(value))

    @classmethod
    def at_most(cls, value):
        return cls("interval", -math.inf, float(value))

    @classmethod
    def at_least(cls, value):
        return cls("interval", float(value), math.inf)

    @classmethod
    def interval(cls, lower, upper):
        return cls("interval", float(lower), float(upper))

    @classmethod
    def rectangle(cls, mu_bounds, sigma_bounds):
        return cls("rectangle", float(mu_bounds[0]), float(mu_bounds[1]),
                   float(sigma_bounds[0]), float(sigma_bounds[1]))

    @classmethod
    def everything(cls):
        return cls("everything")

    def intervals(self):
        if self.kind == "rectangle":
            raise CapabilityError("rectangle assertions need a two-parameter map")
        return np.array([[self.lower, self.upper]])

    def complement_intervals(self):
        if self.kind == "rectangle":
            raise CapabilityError("rectangle assertions need a two-parameter map")
        return _complement(self.intervals())

    def contains(self, value) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class MonotoneMap:
    """Strictly monotone map from a scalar parameter to the auxiliary variable."""

    forward: Callable
    increasing: bool = True
    inverse: Optional[Callable] = field(default=None, compare=False)

    def __call__(self, theta):
        return self.forward(theta)

    def preimage(self, intervals):
        """Parameter intervals mapped onto the given auxiliary intervals."""
        if self.inverse is None:
            raise CapabilityError("map has no inverse")
        iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.asarray(self.inverse(iv[:, 0]), dtype=float)
            b = np.asarray(self.inverse(iv[:, 1]), dtype=float)
        if not self.increasing:
            a, b = b, a
        out = np.column_stack([a, b])
        return out[np.argsort(out[:, 0])]

    def image(self, intervals):
        iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.asarray(self.forward(iv[:, 0]), dtype=float)
            b = np.asarray(self.forward(iv[:, 1]), dtype=float)
        if not self.increasing:
            a, b = b, a
        return np.column_stack([a, b])


def basic_map(x: float, sigma: float = 1.0) -> MonotoneMap:
    """mu -> (x - mu)/sigma for one observation X = mu + sigma*U."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return MonotoneMap(lambda mu: (x - np.asarray(mu, dtype=float)) / sigma, increasing=False,
                       inverse=lambda u: x - sigma * np.asarray(u, dtype=float))


def basic_plausibility(x, mu0, sigma_known=1.0):
    """Plausibility of {mu0} from one observation under the symmetric set.

    Equals 2 F(-|x - mu0|/sigma) with F the standard Cauchy cdf; the
    belief of any singleton is 0.
    """
    if not sigma_known > 0:
        raise DomainError("sigma_known must be positive")
    z = np.abs(np.asarray(x, dtype=float) - np.asarray(mu0, dtype=float)) / sigma_known
    out = 1.0 - 2.0 * np.arctan(z) / math.pi
    return out if np.ndim(out) else float(out)


def belief_and_plausibility(theta_map: MonotoneMap, assertion: Assertion,
                            random_set: RandomSetSpec, draws: Optional[int] = None, seed=0):
    """(belief, plausibility) of ``assertion`` given the data encoded in ``theta_map``.

    With ``draws=None`` the exact auxiliary-space probabilities are used;
    otherwise the random set is simulated ``draws`` times.
    """
    if not isinstance(theta_map, MonotoneMap):
        raise CapabilityError("only monotone one-parameter maps are supported")
    if assertion.kind == "everything":
        return 1.0, 1.0
    aux = theta_map.image(assertion.intervals())
    if draws is not None:
        return random_set.monte_carlo(aux, int(draws), seed)
    if assertion.kind == "singleton":
        pl = random_set.containment(aux[0, 0])
        return 0.0, float(pl)
    return random_set.belief_of(aux), random_set.plausibility_of(aux)


@dataclass(frozen=True)
class PlausibilityCurve:
    """Singleton plausibilities on a parameter grid.

    ``func``, when given, evaluates the exact curve and is used to refine
    interval endpoints beyond grid resolution.
    """

    grid: np.ndarray
    values: np.ndarray
    param: str = "mu"
    func: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.shape[0] != v.shape[0]:
            raise DomainError("grid and values differ in length")
        if np.any((v < 0) | (v > 1)):
            raise DomainError("plausibility values must lie in [0, 1]")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def argmax(self):
        return self.grid[int(np.argmax(self.values))]

    def to_rows(self):
        return list(zip(self.grid.tolist(), self.values.tolist()))


def plausibility_interval(curve: PlausibilityCurve, level: float):
    """{theta : pl(theta) > 1 - level} around the curve's maximum.

    Each flank is solved with :func:`invert_monotone` on ``curve.func`` when
    available, else by linear interpolation between grid points. When the
    set reaches the grid edge the bracket is widened using ``curve.func``.
    """
    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    cut = 1.0 - level
    g, v = curve.grid, curve.values
    k = int(np.argmax(v))
    if v[k] <= cut:
        raise EmptyIntervalError(f"maximum plausibility {v[k]:.6g} does not exceed {cut:.6g}")
    i = k
    while i > 0 and v[i - 1] > cut:
        i -= 1
    j = k
    while j < len(g) - 1 and v[j + 1] > cut:
        j += 1
    f = curve.func
    positive = curve.param == "sigma"

    def flank(inside, outside, vin, vout, direction):
        if f is None:
            if outside is None:
                return inside
            return outside + (inside - outside) * (cut - vout) / (vin - vout)
        if outside is None:
            step = max(abs(inside), 1.0)
            outside = inside
            for _ in range(200):
                if positive and direction < 0:
                    outside = outside / 2.0
                else:
                    outside = outside + direction * step
                    step *= 2.0
                if f(outside) <= cut:
                    break
            else:
                raise EmptyIntervalError("plausibility does not fall below the cut")
        a, b = min(inside, outside), max(inside, outside)
        return invert_monotone(f, cut, (a, b), tol=1e-12 * max(1.0, abs(inside)))

    lo = flank(g[i], g[i - 1] if i > 0 else None, v[i], v[i - 1] if i > 0 else None, -1)
    hi = flank(g[j], g[j + 1] if j < len(g) - 1 else None, v[j],
               v[j + 1] if j < len(g) - 1 else None, 1)
    return float(lo), float(hi)


def validity_check(random_set: RandomSetSpec, aux_density: Optional[GridDensity] = None,
                   n_sim: int = 10_000, seed=0, alpha: float = 0.01) -> SimulationReport:
    """Simulate U* from ``aux_density`` and test P(U* in S | U*) against uniform.

    Validity means P(pl <= a) <= a for all a; the one-sided KS test looks
    for an empirical cdf above the diagonal. The two-sided test checks
    exact uniformity.
    """
    if n_sim < 1000:
        raise DomainError("n_sim must be at least 1000")
    import time

    t0 = time.perf_counter()
    aux = aux_density if aux_density is not None else random_set.reference
    rs = random_set.with_reference(aux)
    u = aux.sample(n_sim, cauchy.rng_for(seed, 0))
    if rs.kind == "density-contour":
        q = _contour_values(aux, u)
    else:
        q = np.asarray(rs.containment(u), dtype=float)
    return SimulationReport.from_values(
        scenario={"method": "random-set", "set_kind": rs.kind, "shrink": rs.shrink},
        values=q, seed=seed, alpha=alpha, runtime=time.perf_counter() - t0,
    )


def _contour_values(density: GridDensity, u):
    """P(f(U) <= f(u)) for each u."""
    lf = np.atleast_1d(np.asarray(density.logpdf(u), dtype=float))
    return np.array([density.mass_below(c) for c in lf])


def as_random_set(random_set, reference: GridDensity) -> RandomSetSpec:
    """Bind a kind name or :class:`RandomSetSpec` to ``reference``."""
    if random_set is None:
        random_set = "density-contour"
    if isinstance(random_set, str):
        return RandomSetSpec(random_set, reference)
    return random_set.with_reference(reference)


def curve_from_function(func, grid, param="mu") -> PlausibilityCurve:
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be nonempty and strictly increasing")
    vals = np.array([func(g) for g in grid], dtype=float)
    return PlausibilityCurve(grid, np.clip(vals, 0.0, 1.0), param, func)
