"""Cauchy distribution primitives and the Mobius parameter map.

The location-scale family C(mu, sigma) is closed under real Mobius maps
y -> (a y + b) / (c y + d) acting on the complex parameter mu + i sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "CauchyParams",
    "MobiusCoeffs",
    "IDENTITY",
    "RECIPROCAL",
    "pdf",
    "logpdf",
    "cdf",
    "quantile",
    "sample",
    "mobius_transform",
    "transform_data",
    "rng_for",
]


@dataclass(frozen=True)
class CauchyParams:
    """Location ``mu`` and scale ``sigma`` of C(mu, sigma)."""

    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise DomainError(f"parameters must be finite, got ({self.mu}, {self.sigma})")
        if self.sigma <= 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    @property
    def theta(self) -> complex:
        return complex(self.mu, self.sigma)


@dataclass(frozen=True)
class MobiusCoeffs:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if self.a * self.d - self.b * self.c == 0:
            raise DomainError("degenerate Mobius coefficients: ad - bc = 0")

    def compose(self, inner: "MobiusCoeffs") -> "MobiusCoeffs":
        """Coefficients of ``self(inner(y))`` (matrix product)."""
        return MobiusCoeffs(
            self.a * inner.a + self.b * inner.c,
            self.a * inner.b + self.b * inner.d,
            self.c * inner.a + self.d * inner.c,
            self.c * inner.b + self.d * inner.d,
        )


IDENTITY = MobiusCoeffs(1.0, 0.0, 0.0, 1.0)
# y -> 1/y needs b = 1; with b = 0 the map collapses to the constant 0.
RECIPROCAL = MobiusCoeffs(0.0, 1.0, 1.0, 0.0)


def _standardize(x, params: CauchyParams):
    return (np.asarray(x, dtype=float) - params.mu) / params.sigma


def pdf(x, params: CauchyParams = CauchyParams()):
    z = _standardize(x, params)
    return 1.0 / (math.pi * params.sigma * (1.0 + z * z))


def logpdf(x, params: CauchyParams = CauchyParams()):
    """Log-density; safe to sum over thousands of observations."""
    z = _standardize(x, params)
    return -math.log(math.pi * params.sigma) - np.log1p(z * z)


def cdf(x, params: CauchyParams = CauchyParams()):
    z = _standardize(x, params)
    # arctan(-inf) = -pi/2, so the limits 0 and 1 come out exactly
    return np.arctan(z) / math.pi + 0.5


def quantile(p, params: CauchyParams = CauchyParams()):
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise DomainError("quantile requires 0 < p < 1")
    return params.mu + params.sigma * np.tan(math.pi * (p - 0.5))


def rng_for(seed, *stream) -> np.random.Generator:
    """Generator for the substream ``stream`` of ``seed``.

    Streams are keyed by integers, so replicate ``i`` always sees the same
    draws no matter which worker or in which order it runs.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def sample(n: int, params: CauchyParams = CauchyParams(), seed=0, stream=(), rng=None):
    """``n`` iid draws by inversion of uniform variates.

    Either pass an explicit ``rng`` or a ``seed`` plus substream key.
    """
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    if rng is None:
        rng = rng_for(seed, *stream)
    u = rng.random(n)
    # random() may return exactly 0.0
    u = np.where(u == 0.0, 0.5, u)
    return params.mu + params.sigma * np.tan(math.pi * (u - 0.5))


def mobius_transform(params: CauchyParams, coeffs: MobiusCoeffs) -> CauchyParams:
    """Parameters of (aY+b)/(cY+d) for Y ~ C(params).

    The sign of the imaginary part is dropped: C(mu, sigma) and
    C(mu, -sigma) are the same law.
    """
    theta = params.theta
    den = coeffs.c * theta + coeffs.d
    if den == 0:
        raise DomainError("c*theta + d vanishes")
    out = (coeffs.a * theta + coeffs.b) / den
    return CauchyParams(out.real, abs(out.imag))


def transform_data(data, coeffs: MobiusCoeffs):
    x = np.asarray(data, dtype=float)
    den = coeffs.c * x + coeffs.d
    bad = np.flatnonzero(den == 0)
    if bad.size:
        raise DomainError(f"data point at index {int(bad[0])} hits the pole -d/c")
    return (coeffs.a * x + coeffs.b) / den
