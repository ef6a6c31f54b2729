"""Marginal IMs for the scale alone and for the location alone.

With (T, S) = ((X(1) - mu)/sigma, (X(2) - X(1))/sigma) given the
ancillary w, sigma is inferred by predicting S and mu by predicting
M = T/S = (X(1) - mu)/(X(2) - X(1)). The corresponding one-sided
endpoints on the parameter scale are G = (X(2) - X(1))/S and
Z = X(1) - (X(2) - X(1)) M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import (Assertion, MonotoneMap, PlausibilityCurve, as_random_set,
                     belief_and_plausibility, curve_from_function)
from .errors import DomainError
from .joint import AncillaryDecomposition, decompose, full_w
from .quadrature import GridDensity, log_lorentzian_product_integral, log_scale_mixture, normalize

__all__ = [
    "MarginalDensity",
    "marginal_density_s",
    "marginal_density_m",
    "g_density",
    "z_density",
    "marginal_plausibility_sigma",
    "marginal_plausibility_mu",
    "marginal_belief_plausibility",
    "marginal_region",
    "marginal_interval",
    "marginal_curve",
]

TARGETS = ("S", "M", "G", "Z")


@dataclass(frozen=True)
class MarginalDensity:
    """Conditional density of one of S, M, G, Z given the ancillary ``w``.

    ``w`` holds w_3..w_n; S and G live on (0, inf), M and Z on the line.
    """

    target: str
    density: GridDensity
    w: tuple

    def __post_init__(self):
        if self.target not in TARGETS:
            raise DomainError(f"target must be one of {TARGETS}")
        want = "positive" if self.target in ("S", "G") else "real"
        if self.density.domain != want:
            raise DomainError(f"{self.target} density must live on the {want} domain")
        object.__setattr__(self, "w", tuple(float(v) for v in self.w))

    @property
    def n(self) -> int:
        return len(self.w) + 2

    def pdf(self, x):
        return self.density.pdf(x)

    def cdf(self, x):
        return self.density.cdf(x)

    def quantile(self, p):
        return self.density.quantile(p)


def _scale_center(wf):
    gaps = np.diff(np.unique(wf))
    return 1.0 / math.sqrt(wf.max() * gaps.min())


def marginal_density_s(w, n=None) -> MarginalDensity:
    """Density of S given w: s^(n-2) int prod_i 1/(1 + (t + w_i s)^2) dt.

    ``w`` is w_3..w_n (or an :class:`AncillaryDecomposition`); the t-integral
    is done per node by the Lorentzian ladder rule.
    """
    wf = full_w(w, n)
    k = wf.size

    def log_f(s):
        s = np.atleast_1d(np.asarray(s, dtype=float)).ravel()
        return (k - 2) * np.log(s) + log_lorentzian_product_integral(-np.outer(s, wf), np.ones(s.size))

    dens = normalize(log_f, "positive", center=_scale_center(wf), scale=1.0, rtol=1e-11)
    return MarginalDensity("S", dens, tuple(wf[2:]))


def marginal_density_m(w, n=None) -> MarginalDensity:
    """Density of M = T/S given w: int_0^inf s^(n-1) prod_i 1/(1 + (m + w_i)^2 s^2) ds."""
    wf = full_w(w, n)
    k = wf.size

    def log_f(m):
        m = np.atleast_1d(np.asarray(m, dtype=float)).ravel()
        with np.errstate(divide="ignore"):
            lb = 2.0 * np.log(np.abs(m[:, None] + wf))
        return log_scale_mixture(lb, float(k))

    dens = normalize(log_f, "real", center=float(np.median(-wf)), scale=1.0, breakpoints=-wf,
                     rtol=1e-11)
    return MarginalDensity("M", dens, tuple(wf[2:]))


def _sorted_data(data):
    dec = decompose(data)
    return np.sort(np.asarray(data, dtype=float).ravel()), dec


def g_density(data) -> MarginalDensity:
    """Density of G = (X(2) - X(1))/S, computed directly in data units.

    Proportional to g^-(n+1) int prod_i 1/(1 + (x_i - u)^2/g^2) du.
    """
    x, dec = _sorted_data(data)
    n = x.size

    def log_f(g):
        g = np.atleast_1d(np.asarray(g, dtype=float)).ravel()
        return -(n + 1) * np.log(g) + log_lorentzian_product_integral(
            np.broadcast_to(x, (g.size, n)), g)

    center = dec.spacing / _scale_center(dec.w_full)
    dens = normalize(log_f, "positive", center=center, scale=1.0, rtol=1e-11)
    return MarginalDensity("G", dens, dec.w)


def z_density(data) -> MarginalDensity:
    """Density of Z = X(1) - (X(2) - X(1)) M, computed directly in data units.

    Proportional to int_0^inf r^(n-1) prod_i 1/(1 + (z - x_i)^2 r^2) dr,
    the form obtained with r = 1/s.
    """
    x, dec = _sorted_data(data)
    n = x.size

    def log_f(z):
        z = np.atleast_1d(np.asarray(z, dtype=float)).ravel()
        with np.errstate(divide="ignore"):
            lb = 2.0 * np.log(np.abs(z[:, None] - x))
        return log_scale_mixture(lb, float(n))

    dens = normalize(log_f, "real", center=float(np.median(x)), scale=dec.spacing, breakpoints=x,
                     rtol=1e-11)
    return MarginalDensity("Z", dens, dec.w)


# ---------------------------------------------------------------------------
# plausibility


def _parts(data, param, density=None):
    """(aux density, parameter -> aux map) for param 'mu' or 'sigma'."""
    dec = data if isinstance(data, AncillaryDecomposition) else decompose(data)
    x1, sp = dec.x1, dec.spacing
    if param == "sigma":
        dens = density if density is not None else marginal_density_s(dec).density

        def fwd(sig):
            sig = np.asarray(sig, dtype=float)
            with np.errstate(divide="ignore"):
                return np.where(sig > 0, sp / np.where(sig > 0, sig, 1.0), np.inf)

        return dens, MonotoneMap(fwd, increasing=False,
                                 inverse=lambda s: sp / np.asarray(s, dtype=float))
    if param == "mu":
        dens = density if density is not None else marginal_density_m(dec).density
        return dens, MonotoneMap(lambda mu: (x1 - np.asarray(mu, dtype=float)) / sp,
                                 increasing=False,
                                 inverse=lambda m: x1 - sp * np.asarray(m, dtype=float))
    raise DomainError(f"param must be 'mu' or 'sigma', got {param!r}")


def marginal_plausibility_sigma(data, sigma0, random_set="density-contour", density=None):
    """Plausibility of {sigma0}: containment of s0 = (x(2) - x(1))/sigma0.

    With ``one-sided-lower`` (sets [S, inf)) the propagated set on sigma is
    (0, G], so pl(sigma0) = P(G >= sigma0).
    """
    s0 = np.asarray(sigma0, dtype=float)
    if np.any(~(s0 > 0)) or np.any(~np.isfinite(s0)):
        raise DomainError("sigma0 must be positive and finite")
    dens, theta_map = _parts(data, "sigma", density)
    return as_random_set(random_set, dens).containment(theta_map(s0))


def marginal_plausibility_mu(data, mu0, random_set="density-contour", density=None):
    """Plausibility of {mu0}: containment of m0 = (x(1) - mu0)/(x(2) - x(1))."""
    mu0 = np.asarray(mu0, dtype=float)
    if np.any(~np.isfinite(mu0)):
        raise DomainError("mu0 must be finite")
    dens, theta_map = _parts(data, "mu", density)
    return as_random_set(random_set, dens).containment(theta_map(mu0))


def marginal_belief_plausibility(data, param, assertion: Assertion, random_set="density-contour",
                                 density=None):
    """(belief, plausibility) of an interval assertion on mu or sigma alone."""
    dens, theta_map = _parts(data, param, density)
    return belief_and_plausibility(theta_map, assertion, as_random_set(random_set, dens))


def marginal_region(data, param, level, random_set="density-contour", density=None):
    """{theta : pl(theta) > 1 - level} as an (m, 2) array of intervals."""
    dens, theta_map = _parts(data, param, density)
    aux = as_random_set(random_set, dens).plausible_region(level)
    return theta_map.preimage(aux)


def marginal_interval(data, param, level, random_set="density-contour", density=None):
    """Hull (lower, upper) of :func:`marginal_region`.

    For sigma with ``one-sided-lower`` this is (0, G quantile at ``level``);
    for mu with ``cdf-centered`` it is the equal-tailed Z interval.
    """
    reg = marginal_region(data, param, level, random_set, density)
    return float(reg[0, 0]), float(reg[-1, 1])


def marginal_curve(data, param, grid, random_set="density-contour", density=None) -> PlausibilityCurve:
    """Singleton plausibility of mu or sigma over ``grid``."""
    dens, theta_map = _parts(data, param, density)
    rs = as_random_set(random_set, dens)
    return curve_from_function(lambda v: rs.containment(theta_map(v)), grid, param)
