"""Conditional IM for the location with known scale.

With X_i = mu + sigma U_i, the differences W_i = (X_i - X_1)/sigma are
observed functions of the auxiliaries, so only U_1 (or any weighted
average T = sum a_i U_i) has to be predicted, using its conditional law
given W.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import (Assertion, MonotoneMap, PlausibilityCurve, as_random_set,
                     belief_and_plausibility, curve_from_function)
from .errors import DomainError
from .quadrature import GridDensity, normalize

__all__ = [
    "WeightVector",
    "conditional_density_u1",
    "conditional_density_t",
    "cim_plausibility_mu",
    "cim_curve",
]


@dataclass(frozen=True)
class WeightVector:
    """Weights a with sum 1 and a_1 != 0 defining T = sum a_i U_i."""

    a: tuple

    def __post_init__(self):
        a = tuple(float(v) for v in np.ravel(self.a))
        if len(a) == 0:
            raise DomainError("weight vector is empty")
        if not all(math.isfinite(v) for v in a):
            raise DomainError("weights must be finite")
        if abs(math.fsum(a) - 1.0) > 1e-12:
            raise DomainError(f"weights must sum to 1, got {math.fsum(a)!r}")
        if a[0] == 0.0:
            raise DomainError("first weight must be nonzero")
        object.__setattr__(self, "a", a)

    @classmethod
    def first(cls, n):
        return cls((1.0,) + (0.0,) * (n - 1))

    @classmethod
    def uniform(cls, n):
        # fsum of n copies of 1/n can miss 1 by an ulp; absorb it in a_1
        a = [1.0 / n] * n
        a[0] = 1.0 - math.fsum(a[1:])
        return cls(tuple(a))

    def __len__(self):
        return len(self.a)


def _data(data):
    x = np.asarray(data, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("data are empty")
    if not np.all(np.isfinite(x)):
        raise DomainError("data must be finite")
    return x


def _sigma(sigma_known):
    if not (sigma_known > 0 and math.isfinite(sigma_known)):
        raise DomainError("sigma_known must be positive and finite")
    return float(sigma_known)


def _product_density(offsets) -> GridDensity:
    """Normalized density proportional to prod_k 1/(1 + (t - c_k)^2)."""
    c = np.asarray(offsets, dtype=float)

    def log_f(t):
        t = np.asarray(t, dtype=float)
        d = t[..., None] - c
        return -np.sum(np.log1p(d * d), axis=-1)

    return normalize(log_f, "real", center=float(np.median(c)), scale=1.0, breakpoints=c)


def conditional_density_u1(data, sigma_known=1.0) -> GridDensity:
    """Law of U_1 given W: proportional to prod_i 1/(1 + (u + w_i)^2).

    ``w_i = (x_i - x_1)/sigma`` in the order the data were given; the
    parameter is recovered as mu = x_1 - sigma u.
    """
    x = _data(data)
    s = _sigma(sigma_known)
    return _product_density(-(x - x[0]) / s)


def conditional_density_t(data, sigma_known=1.0, weights: WeightVector | None = None) -> GridDensity:
    """Law of T = sum a_i U_i given W.

    Proportional to prod_k 1/(1 + (t - c_k)^2) with
    c_k = (sum_j a_j x_j - x_k)/sigma, product over all k.
    """
    x = _data(data)
    s = _sigma(sigma_known)
    if weights is None:
        weights = WeightVector.first(x.size)
    if not isinstance(weights, WeightVector):
        weights = WeightVector(tuple(weights))
    if len(weights) != x.size:
        raise DomainError(f"need {x.size} weights, got {len(weights)}")
    center = math.fsum(np.asarray(weights.a) * x)
    return _product_density((center - x) / s)


def _cim_parts(data, sigma_known, weights):
    x = _data(data)
    s = _sigma(sigma_known)
    if weights is None:
        weights = WeightVector.first(x.size)
    elif not isinstance(weights, WeightVector):
        weights = WeightVector(tuple(weights))
    dens = conditional_density_t(x, s, weights)
    center = math.fsum(np.asarray(weights.a) * x)
    # T = (sum a_i x_i - mu)/sigma: decreasing in mu
    theta_map = MonotoneMap(lambda mu: (center - np.asarray(mu, dtype=float)) / s, increasing=False,
                            inverse=lambda t: center - s * np.asarray(t, dtype=float))
    return dens, theta_map


def cim_plausibility_mu(data, sigma_known, assertion: Assertion, random_set="density-contour",
                        weights=None, draws=None, seed=0):
    """(belief, plausibility) of a mu-assertion under the conditional IM.

    ``random_set`` is a kind name or :class:`RandomSetSpec` acting on the
    auxiliary T. Because mu decreases in T, the aux-space family
    ``one-sided-upper`` gives pl({mu <= mu0}) = 1 - F_T(t0), which is
    the flat-prior posterior cdf at mu0.
    """
    dens, theta_map = _cim_parts(data, sigma_known, weights)
    rs = as_random_set(random_set, dens)
    return belief_and_plausibility(theta_map, assertion, rs, draws=draws, seed=seed)


def cim_curve(data, sigma_known, grid, random_set="density-contour", weights=None) -> PlausibilityCurve:
    """Singleton plausibility of mu over ``grid``."""
    dens, theta_map = _cim_parts(data, sigma_known, weights)
    rs = as_random_set(random_set, dens)
    return curve_from_function(lambda mu: rs.containment(theta_map(mu)), grid, "mu")
