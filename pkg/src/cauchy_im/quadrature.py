"""Quadrature for heavy-tailed integrands and tabulated densities.

Everything the IM constructions need reduces to a handful of primitives:

* adaptive Gauss-Kronrod (7/15) on a tangent-substituted line or half-line;
* :class:`GridDensity`, an adaptively panelled, normalized density built
  from an unnormalized log-density, with cdf/quantile/contour queries;
* :func:`lorentzian_rule`, a graded composite Gauss-Legendre rule for
  products of Lorentzian factors with widely separated centres;
* :func:`log_scale_mixture`, a trapezoid rule in log-scale for
  integrals of the form  int_0^inf s^(alpha-1) prod 1/(1 + b_i s^2) ds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.optimize import brentq, minimize_scalar

from .errors import AccuracyError, DomainError

__all__ = [
    "QuadResult",
    "integrate_interval",
    "integrate_real_line",
    "integrate_half_line",
    "integrate",
    "invert_monotone",
    "GridDensity",
    "normalize",
    "lorentzian_panels",
    "lorentzian_rule",
    "log_lorentzian_product_integral",
    "log_scale_mixture",
]

# Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])

KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[1:15:2] = np.concatenate([_WG[:-1], _WG[::-1]])

# Interpolation through the 15 Kronrod nodes: values -> Legendre coefficients,
# and values -> coefficients of the antiderivative vanishing at -1.
_VINV = np.linalg.inv(npleg.legvander(KRONROD_NODES, 14))
_ANTIDERIV = np.column_stack(
    [npleg.legint(_VINV[:, j], lbnd=-1) for j in range(15)]
)  # (16, 15)


def _legendre_basis(y, degree):
    """Rows of P_0(y) .. P_degree(y); ``y`` is 1-D."""
    out = np.empty((y.size, degree + 1))
    out[:, 0] = 1.0
    if degree >= 1:
        out[:, 1] = y
    for j in range(1, degree):
        out[:, j + 1] = ((2 * j + 1) * y * out[:, j] - j * out[:, j - 1]) / (j + 1)
    return out


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    n_panels: int

    def __float__(self):
        return float(self.value)


def _gk_adapt(g, a, b, rtol, atol, max_panels):
    """Globally adaptive GK15 on the panels [a_i, b_i] (finite)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    def panel(a, b):
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        x = mid[:, None] + half[:, None] * KRONROD_NODES
        v = np.asarray(g(x), dtype=float).reshape(x.shape)
        if not np.all(np.isfinite(v)):
            raise AccuracyError("integrand is not finite at a quadrature node")
        k = half * (v @ KRONROD_WEIGHTS)
        gg = half * (v @ GAUSS_WEIGHTS)
        ka = half * (np.abs(v) @ KRONROD_WEIGHTS)
        return k, np.abs(k - gg), ka

    k, err, ka = panel(a, b)
    while True:
        total = k.sum()
        tol = max(atol, rtol * ka.sum())
        if err.sum() <= tol:
            return total, err.sum(), a.size
        if a.size >= max_panels:
            raise AccuracyError("maximum number of panels reached", total, err.sum())
        order = np.argsort(-err)
        excess = err.sum() - 0.5 * tol
        m = int(np.searchsorted(np.cumsum(err[order]), excess)) + 1
        pick = order[:m]
        width = b[pick] - a[pick]
        ok = width > 1e-14 * (1.0 + np.abs(a[pick]))
        if not np.any(ok):
            raise AccuracyError("panels cannot be split further", total, err.sum())
        pick = pick[ok]
        mid = 0.5 * (a[pick] + b[pick])
        na = np.concatenate([a[pick], mid])
        nb = np.concatenate([mid, b[pick]])
        nk, nerr, nka = panel(na, nb)
        keep = np.ones(a.size, bool)
        keep[pick] = False
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        k = np.concatenate([k[keep], nk])
        err = np.concatenate([err[keep], nerr])
        ka = np.concatenate([ka[keep], nka])


def _initial_edges(lo, hi, n, extra=()):
    edges = np.linspace(lo, hi, n + 1)
    extra = np.asarray(extra, dtype=float)
    extra = extra[(extra > lo) & (extra < hi)]
    return np.unique(np.concatenate([edges, extra]))


def integrate_interval(f, a, b, rtol=1e-10, atol=0.0, points=(), max_panels=4000):
    """Adaptive GK15 over a finite interval; ``f`` must accept arrays."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("integrate_interval needs finite limits")
    if a == b:
        return QuadResult(0.0, 0.0, 0)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    edges = _initial_edges(a, b, 4, points)
    val, err, npan = _gk_adapt(f, edges[:-1], edges[1:], rtol, atol, max_panels)
    return QuadResult(sign * val, err, npan)


def integrate_real_line(f, rtol=1e-10, atol=0.0, center=0.0, scale=1.0, points=(),
                        max_panels=4000):
    """Integral of ``f`` over the real line.

    Uses u = center + scale * tan(v) on (-pi/2, pi/2); integrands with
    |u|^-2 tails become bounded. ``points`` are interior locations where
    ``f`` is peaked or kinked and become panel boundaries.
    """
    def g(v):
        c = np.cos(v)
        return f(center + scale * np.tan(v)) * scale / (c * c)

    extra = np.arctan((np.asarray(points, dtype=float) - center) / scale)
    edges = _initial_edges(-0.5 * math.pi, 0.5 * math.pi, 16, extra)
    val, err, npan = _gk_adapt(g, edges[:-1], edges[1:], rtol, atol, max_panels)
    return QuadResult(val, err, npan)


def integrate_half_line(f, rtol=1e-10, atol=0.0, scale=1.0, points=(), max_panels=4000):
    """Integral of ``f`` over (0, inf) via s = scale * tan(v), v in (0, pi/2)."""
    def g(v):
        c = np.cos(v)
        return f(scale * np.tan(v)) * scale / (c * c)

    pts = np.asarray(points, dtype=float)
    extra = np.arctan(pts[pts > 0] / scale)
    edges = _initial_edges(0.0, 0.5 * math.pi, 16, extra)
    val, err, npan = _gk_adapt(g, edges[:-1], edges[1:], rtol, atol, max_panels)
    return QuadResult(val, err, npan)


def integrate(f, a=-math.inf, b=math.inf, rtol=1e-10, atol=0.0, points=(), scale=1.0,
              max_panels=4000):
    """Integral of ``f`` over [a, b]; either end may be infinite.

    Infinite ends use a tangent substitution anchored at the finite end
    (or at 0 for the whole line) with length ``scale``.
    """
    a, b = float(a), float(b)
    if a == b:
        return QuadResult(0.0, 0.0, 0)
    if b < a:
        r = integrate(f, b, a, rtol, atol, points, scale, max_panels)
        return QuadResult(-r.value, r.error, r.n_panels)
    pts = np.asarray(points, dtype=float)
    if math.isfinite(a) and math.isfinite(b):
        return integrate_interval(f, a, b, rtol, atol, pts, max_panels)
    if not math.isfinite(a) and not math.isfinite(b):
        return integrate_real_line(f, rtol, atol, 0.0, scale, pts, max_panels)
    if math.isfinite(a):
        return integrate_half_line(lambda s: f(a + s), rtol, atol, scale, pts - a, max_panels)
    return integrate_half_line(lambda s: f(b - s), rtol, atol, scale, b - pts, max_panels)


def invert_monotone(g, target, bracket, tol=1e-8):
    """Solve g(x) = target for monotone ``g`` on ``bracket`` (Brent's method)."""
    lo, hi = map(float, bracket)
    flo = g(lo) - target
    fhi = g(hi) - target
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise DomainError(
            f"target {target} outside [{g(lo)}, {g(hi)}] on bracket [{lo}, {hi}]"
        )
    return brentq(lambda x: g(x) - target, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps,
                  maxiter=200)


# ---------------------------------------------------------------------------
# Tabulated densities


def _log_cosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


class GridDensity:
    """Normalized one-dimensional density on the real line or on (0, inf).

    Built by :func:`normalize`. The density is tabulated on adaptive
    Gauss-Kronrod panels in an internal coordinate ``xi``:

    * real line:      x = center + scale * sinh(xi)
    * positive line:  x = center * exp(scale * xi)

    Cdf and quantile queries use the degree-14 interpolant on each panel;
    density values are always recomputed from the log-density callable.
    Instances are immutable after construction.
    """

    def __init__(self, log_f, domain, center, scale, edges, logg, max_log):
        self._log_f = log_f
        self.domain = domain
        self.center = float(center)
        self.scale = float(scale)
        self.edges = edges
        half = 0.5 * (edges[1:] - edges[:-1])
        self._mid = 0.5 * (edges[1:] + edges[:-1])
        self._half = half
        vals = np.exp(logg - max_log)
        k = half * (vals @ KRONROD_WEIGHTS)
        total = k.sum()
        if not (total > 0 and math.isfinite(total)):
            raise AccuracyError("density has no mass on its grid", total)
        self.log_norm = max_log + math.log(total)
        vals = vals / total
        self._masses = k / total
        self.cum = np.concatenate([[0.0], np.cumsum(self._masses)])
        self.cum /= self.cum[-1]
        self._dcoef = (vals @ _ANTIDERIV.T) * half[:, None]
        self._ccoef = vals @ _VINV.T
        xi = self._mid[:, None] + half[:, None] * KRONROD_NODES
        self._xi_nodes = xi.ravel()
        self._x_nodes = self._to_x(self._xi_nodes)
        self._logf_nodes = (logg.ravel() - self._log_jac(self._xi_nodes) - self.log_norm)

    # -- coordinate maps -------------------------------------------------
    def _to_x(self, xi):
        if self.domain == "real":
            return self.center + self.scale * np.sinh(xi)
        return self.center * np.exp(self.scale * xi)

    def _to_xi(self, x):
        x = np.asarray(x, dtype=float)
        if self.domain == "real":
            return np.arcsinh((x - self.center) / self.scale)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, np.log(np.where(x > 0, x, 1.0) / self.center) / self.scale,
                            -np.inf)

    def _log_jac(self, xi):
        if self.domain == "real":
            return math.log(self.scale) + _log_cosh(xi)
        return math.log(self.scale * self.center) + self.scale * xi

    # -- basic queries ------------------------------------------------------
    @property
    def support(self):
        return (float(self._to_x(self.edges[0])), float(self._to_x(self.edges[-1])))

    @property
    def n_panels(self):
        return self._masses.size

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.domain == "positive":
            out = np.full(x.shape, -np.inf)
            pos = x > 0
            if np.any(pos):
                out[pos] = np.asarray(self._log_f(x[pos])) - self.log_norm
            return out if out.ndim else float(out)
        out = np.asarray(self._log_f(x.ravel()), dtype=float).reshape(x.shape) - self.log_norm
        return out if out.ndim else float(out)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def _cdf_xi(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.empty(xi.shape)
        lo = xi <= self.edges[0]
        hi = xi >= self.edges[-1]
        out[lo] = 0.0
        out[hi] = 1.0
        mid = ~(lo | hi)
        if np.any(mid):
            z = xi[mid]
            k = np.clip(np.searchsorted(self.edges, z, side="right") - 1, 0, self.n_panels - 1)
            y = np.clip((z - self._mid[k]) / self._half[k], -1.0, 1.0)
            part = np.einsum("ij,ij->i", _legendre_basis(y, 15), self._dcoef[k])
            out[mid] = np.clip(self.cum[k] + part, self.cum[k], self.cum[k + 1])
        return out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = self._cdf_xi(self._to_xi(x.ravel())).reshape(x.shape)
        return out if out.ndim else float(out)

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def _quantile_xi(self, p):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        k = np.clip(np.searchsorted(self.cum, p, side="right") - 1, 0, self.n_panels - 1)
        target = p - self.cum[k]
        lo = np.full(p.shape, -1.0)
        hi = np.full(p.shape, 1.0)
        y = np.zeros(p.shape)
        dcoef = self._dcoef[k]
        ccoef = self._ccoef[k]
        half = self._half[k]
        for _ in range(60):
            basis = _legendre_basis(y, 15)
            f = np.einsum("ij,ij->i", basis, dcoef) - target
            dens = np.einsum("ij,ij->i", basis[:, :15], ccoef) * half
            lo = np.where(f < 0, y, lo)
            hi = np.where(f >= 0, y, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(dens > 0, f / dens, np.inf)
            ynew = y - step
            bad = ~((ynew > lo) & (ynew < hi))
            ynew = np.where(bad, 0.5 * (lo + hi), ynew)
            done = np.abs(ynew - y) < 1e-15
            y = ynew
            if np.all(done):
                break
        return self._mid[k] + half * y

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p < 0) | (p > 1)):
            raise DomainError("probabilities must lie in [0, 1]")
        out = self._to_x(self._quantile_xi(p.ravel())).reshape(p.shape)
        return out if out.ndim else float(out)

    def sample(self, size, rng):
        u = rng.random(size)
        return self.quantile(u)

    def expect(self, func):
        """Integral of func(x) * pdf(x) on the panel grid."""
        vals = np.exp(self._logf_nodes + self._log_jac(self._xi_nodes))
        fx = np.asarray(func(self._x_nodes), dtype=float)
        w = (self._half[:, None] * KRONROD_WEIGHTS).ravel()
        return float(np.sum(w * vals * fx))

    def mean(self):
        return self.expect(lambda x: x)

    def mode(self):
        i = int(np.argmax(self._logf_nodes))
        lo = self._xi_nodes[max(i - 1, 0)]
        hi = self._xi_nodes[min(i + 1, self._xi_nodes.size - 1)]
        if hi <= lo:
            return float(self._x_nodes[i])
        res = minimize_scalar(lambda z: -self.logpdf(self._to_x(z)), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12})
        x = float(self._to_x(res.x))
        return x if self.logpdf(x) >= self._logf_nodes[i] else float(self._x_nodes[i])

    # -- level sets ---------------------------------------------------------
    def _refine_crossings(self, a, b, level):
        """Roots of logpdf - level bracketed by xi-intervals [a, b] (Illinois)."""
        def d(z):
            return np.asarray(self.logpdf(self._to_x(z)), dtype=float) - level

        fa = d(a)
        fb = d(b)
        a = a.copy()
        b = b.copy()
        for _ in range(80):
            with np.errstate(divide="ignore", invalid="ignore"):
                c = np.where(np.isfinite(fa) & np.isfinite(fb) & (fb != fa),
                             (a * fb - b * fa) / (fb - fa), 0.5 * (a + b))
            c = np.where((c > np.minimum(a, b)) & (c < np.maximum(a, b)), c, 0.5 * (a + b))
            fc = d(c)
            flip = np.sign(fc) != np.sign(fb)
            a = np.where(flip, b, a)
            fa = np.where(flip, fb, 0.5 * fa)
            b, fb = c, fc
            if np.all((np.abs(b - a) < 1e-13 * (1 + np.abs(b))) | (fc == 0)):
                break
        return b

    def superlevel_intervals(self, log_level):
        """Disjoint xi-intervals where logpdf > log_level, as an (m, 2) array."""
        above = self._logf_nodes > log_level
        if not np.any(above):
            return np.empty((0, 2))
        xi = self._xi_nodes
        change = np.flatnonzero(above[1:] != above[:-1])
        roots = self._refine_crossings(xi[change], xi[change + 1], log_level) if change.size else np.empty(0)
        starts = list(roots[~above[change]])
        ends = list(roots[above[change]])
        if above[0]:
            starts.insert(0, self.edges[0])
        if above[-1]:
            ends.append(self.edges[-1])
        return np.column_stack([starts, ends])

    def mass_above(self, log_level):
        iv = self.superlevel_intervals(log_level)
        if iv.size == 0:
            return 0.0
        fa = self._cdf_xi(iv[:, 0])
        fb = self._cdf_xi(iv[:, 1])
        return float(np.clip(np.sum(fb - fa), 0.0, 1.0))

    def mass_below(self, log_level):
        """P(log f(X) <= log_level) for X drawn from this density."""
        return 1.0 - self.mass_above(log_level)

    def contour_plausibility(self, x0):
        """P(f(X) <= f(x0)): non-coverage of the density-contour random set."""
        return self.mass_below(float(self.logpdf(x0)))

    def max_logpdf(self, lo, hi):
        """Supremum of the log-density over [lo, hi]."""
        if hi < lo:
            return -np.inf
        slo, shi = self.support
        if hi < slo or lo > shi:
            cands = [v for v in (lo, hi) if np.isfinite(v)]
            return max(float(self.logpdf(v)) for v in cands) if cands else -np.inf
        x = self._x_nodes
        inside = np.flatnonzero((x >= lo) & (x <= hi))
        best = -np.inf
        best_i = None
        if inside.size:
            j = inside[np.argmax(self._logf_nodes[inside])]
            best, best_i = self._logf_nodes[j], j
        for v in (lo, hi):
            if np.isfinite(v) and (self.domain == "real" or v > 0):
                lv = float(self.logpdf(v))
                if lv > best:
                    best, best_i = lv, None
        if best_i is not None:
            xi = self._xi_nodes
            zlo = xi[max(best_i - 1, 0)]
            zhi = xi[min(best_i + 1, xi.size - 1)]
            zlo = max(zlo, float(self._to_xi(lo))) if np.isfinite(lo) else zlo
            zhi = min(zhi, float(self._to_xi(hi))) if np.isfinite(hi) else zhi
            if zhi > zlo:
                res = minimize_scalar(lambda z: -self.logpdf(self._to_x(z)), bounds=(zlo, zhi),
                                      method="bounded", options={"xatol": 1e-12})
                best = max(best, -float(res.fun))
        return best

    def level_for_mass_below(self, alpha):
        """log-level c with P(log f(X) <= c) = alpha (highest-density region cut)."""
        if not 0 < alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        lf = np.sort(self._logf_nodes[np.isfinite(self._logf_nodes)])
        top = self.max_logpdf(-np.inf, np.inf)
        lo = lf[0] - 1.0
        return brentq(lambda c: self.mass_below(c) - alpha, lo, top, xtol=1e-12, rtol=1e-12)


def normalize(log_f: Callable, domain: str = "real", center: float = 0.0, scale: float = 1.0,
              breakpoints: Sequence[float] = (), rtol: float = 1e-12, step: float | None = None,
              span: float = 45.0, max_panels: int = 6000) -> GridDensity:
    """Turn an unnormalized, vectorized log-density into a :class:`GridDensity`.

    ``center``/``scale`` place the coordinate map (for ``domain="positive"``
    ``center`` is a typical positive value). ``breakpoints`` are x-locations
    of peaks or kinks. Panels are bisected until the Kronrod/Gauss
    discrepancy summed over panels is below ``rtol`` of the total mass.
    """
    if domain not in ("real", "positive"):
        raise DomainError(f"unknown domain {domain!r}")
    if scale <= 0 or (domain == "positive" and center <= 0):
        raise DomainError("scale (and positive-domain center) must be positive")
    dens = GridDensity.__new__(GridDensity)
    dens.domain, dens.center, dens.scale = domain, float(center), float(scale)
    if step is None:
        step = 1.0 if domain == "real" else 2.0
    bp = np.asarray(breakpoints, dtype=float).ravel()
    if domain == "positive":
        bp = bp[bp > 0]
    extra = dens._to_xi(bp) if bp.size else np.empty(0)
    nstep = max(2, int(math.ceil(2 * span / step)))
    edges = _initial_edges(-span, span, nstep, extra)
    edges = edges[np.concatenate([[True], np.diff(edges) > 1e-12 * (1 + np.abs(edges[1:]))])]

    def logg(a, b):
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        xi = mid[:, None] + half[:, None] * KRONROD_NODES
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            x = dens._to_x(xi)
            lv = np.asarray(log_f(x.ravel()), dtype=float).reshape(xi.shape) + dens._log_jac(xi)
        if np.any(np.isnan(lv)) or np.any(lv == np.inf):
            raise AccuracyError("log-density returned nan or +inf on the grid")
        return lv

    a, b = edges[:-1], edges[1:]
    lg = logg(a, b)
    max_log = np.max(lg)
    if not np.isfinite(max_log):
        raise AccuracyError("log-density is -inf everywhere on the grid")
    while True:
        vals = np.exp(lg - max_log)
        half = 0.5 * (b - a)
        k = half * (vals @ KRONROD_WEIGHTS)
        err = np.abs(k - half * (vals @ GAUSS_WEIGHTS))
        total = k.sum()
        tol = rtol * total
        splittable = (b - a) > 1e-12 * (1 + np.abs(a))
        live = np.where(splittable, err, 0.0)
        if live.sum() <= tol:
            break
        if a.size >= max_panels:
            raise AccuracyError("density grid did not converge", total, err.sum())
        order = np.argsort(-live)
        m = int(np.searchsorted(np.cumsum(live[order]), live.sum() - 0.5 * tol)) + 1
        pick = order[:m]
        mid = 0.5 * (a[pick] + b[pick])
        na = np.concatenate([a[pick], mid])
        nb = np.concatenate([mid, b[pick]])
        nlg = logg(na, nb)
        keep = np.ones(a.size, bool)
        keep[pick] = False
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        lg = np.concatenate([lg[keep], nlg])
        max_log = max(max_log, float(np.max(nlg)))
    order = np.argsort(a)
    a, b, lg = a[order], b[order], lg[order]
    edges = np.concatenate([a, b[-1:]])
    GridDensity.__init__(dens, log_f, domain, center, scale, edges, lg, max_log)
    return dens


# ---------------------------------------------------------------------------
# Specialised rules


def lorentzian_panels(centers, width, ratio=3.0):
    """Panel layout for prod_i 1/(1 + ((t - c_i)/width)^2), one row per integrand.

    ``centers`` has shape (R, k) and ``width`` shape (R,). Breakpoints sit
    at every centre and are graded geometrically (factor ``ratio``) away
    from it up to the midpoint with its neighbour; the outermost centres
    are graded out to distance L = max(4, 2 * spread) in units of width.

    Returns ``(prow, a, b, tail_left, tail_right, tail_scale)``: finite
    panels [a, b] belonging to row ``prow`` (rows contiguous, increasing),
    and per row the tails (-inf, tail_left] and [tail_right, inf) with
    their length scale, all in t units.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    R, k = centers.shape
    width = np.broadcast_to(np.asarray(width, dtype=float), (R,))
    z = np.sort(centers / width[:, None], axis=1)
    spread = z[:, -1] - z[:, 0]
    L = np.maximum(4.0, 2.0 * spread)
    gaps = np.diff(z, axis=1)
    left = np.concatenate([L[:, None], 0.5 * gaps], axis=1)
    right = np.concatenate([0.5 * gaps, L[:, None]], axis=1)
    J = int(math.ceil(math.log(max(L.max(), 1.0) / 0.5) / math.log(ratio))) + 1
    offs = 0.5 * ratio ** np.arange(J)

    rows = np.broadcast_to(np.arange(R)[:, None, None], (R, k, J))
    zc = z[:, :, None]
    pr = zc + offs
    mr = offs < right[:, :, None]
    pl = zc - offs
    ml = offs < left[:, :, None]
    vals = [z.ravel(), (z + right).ravel(), (z[:, :1] - L[:, None]).ravel(), pr[mr], pl[ml]]
    rid = [np.repeat(np.arange(R), k), np.repeat(np.arange(R), k), np.arange(R), rows[mr], rows[ml]]
    v = np.concatenate(vals)
    r = np.concatenate(rid)
    o = np.lexsort((v, r))
    v, r = v[o], r[o]
    keep = np.ones(v.size, bool)
    same = r[1:] == r[:-1]
    keep[1:] = ~(same & (v[1:] - v[:-1] <= 1e-13 * np.maximum(1.0, np.abs(v[1:]))))
    v, r = v[keep], r[keep]
    same = r[1:] == r[:-1]
    pa, pb, prow = v[:-1][same], v[1:][same], r[:-1][same]
    wp = width[prow]
    return (prow, pa * wp, pb * wp, (z[:, 0] - L) * width, (z[:, -1] + L) * width, L * width)


def lorentzian_rule(centers, width, order=12, ratio=3.0, tail_order=12):
    """Composite Gauss-Legendre rule for prod_i 1/(1 + ((t - c_i)/width)^2).

    Uses the panels of :func:`lorentzian_panels`; each tail is mapped to
    [0, 1) by t = start +/- L tau/(1 - tau). Returns ``(row, nodes,
    weights)`` flattened over rows; rows are contiguous and in order.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    R = centers.shape[0]
    prow, pa, pb, start_l, start_r, L = lorentzian_panels(centers, width, ratio)

    xg, wg = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (pa + pb)
    half = 0.5 * (pb - pa)
    nodes = (mid[:, None] + half[:, None] * xg).ravel()
    weights = (half[:, None] * wg).ravel()
    nrow = np.repeat(prow, order)

    xt, wt = np.polynomial.legendre.leggauss(tail_order)
    tau = 0.5 * (xt + 1.0)
    jac = 0.5 * wt / (1.0 - tau) ** 2
    off = tau / (1.0 - tau)
    tr = (start_r[:, None] + L[:, None] * off).ravel()
    tl = (start_l[:, None] - L[:, None] * off).ravel()
    wtail = (L[:, None] * jac).ravel()
    trow = np.repeat(np.arange(R), tail_order)

    nodes = np.concatenate([nodes, tr, tl])
    weights = np.concatenate([weights, wtail, wtail])
    nrow = np.concatenate([nrow, trow, trow])
    o = np.argsort(nrow, kind="stable")
    return nrow[o], nodes[o], weights[o]


def _row_logsumexp(row, logv, nrows):
    starts = np.searchsorted(row, np.arange(nrows))
    mx = np.maximum.reduceat(logv, starts)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    s = np.bincount(row, weights=np.exp(logv - mx[row]), minlength=nrows)
    with np.errstate(divide="ignore"):
        return np.log(s) + mx


def _log_residue_sum(z):
    """log int prod_i 1/(1 + (t - z_i)^2) dt by residues at t = z_j + i.

    Each row must have distinct centres; with all gaps >= 4 the terms do
    not cancel and the sum is accurate to rounding.
    """
    d = z[:, :, None] - z[:, None, :]
    k = z.shape[1]
    eye = np.eye(k, dtype=bool)
    # complex logs keep the products in range for widely spread centres
    fac = np.where(eye, 1.0 + 0j, d + 0j)
    logt = -np.sum(np.log(fac) + np.log(np.where(eye, 1.0 + 0j, d + 2j)), axis=2)
    top = logt.real.max(axis=1, keepdims=True)
    tot = np.sum(np.exp(logt - top), axis=1).real
    return math.log(math.pi) + top[:, 0] + np.log(tot)


def log_lorentzian_product_integral(centers, width=1.0, chunk=200_000, residue_gap=4.0):
    """log of int_R prod_i 1/(1 + ((t - c_i)/width)^2) dt for each row of centers.

    Rows whose centres are at least ``residue_gap`` widths apart use the
    closed-form residue sum; the rest use :func:`lorentzian_rule`.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    R, k = centers.shape
    width = np.broadcast_to(np.asarray(width, dtype=float), (R,))
    out = np.empty(R)
    if k > 1 and residue_gap is not None:
        z = np.sort(centers / width[:, None], axis=1)
        far = np.diff(z, axis=1).min(axis=1) >= residue_gap
        if np.any(far):
            out[far] = _log_residue_sum(z[far]) + np.log(width[far])
            if np.all(far):
                return out
            near = ~far
            out[near] = log_lorentzian_product_integral(centers[near], width[near], chunk, None)
            return out
    # rows are processed in blocks to cap memory
    approx_nodes = 60 * k + 24
    block = max(1, chunk // approx_nodes)
    for s in range(0, R, block):
        c = centers[s:s + block]
        w = width[s:s + block]
        row, t, wt = lorentzian_rule(c, w)
        d = (t[:, None] - c[row]) / w[row][:, None]
        logv = np.log(wt) - np.sum(np.log1p(d * d), axis=1)
        out[s:s + block] = _row_logsumexp(row, logv, c.shape[0])
    return out


def log_scale_mixture(log_b, alpha, h=0.25, tail=45.0):
    """log of int_0^inf s^(alpha-1) prod_i 1/(1 + b_i s^2) ds, one row per integral.

    ``log_b`` has shape (R, k); entries may be ``-inf`` (b_i = 0). The
    integrand is smooth in lambda = log s with poles at |Im lambda| = pi/2,
    so a plain trapezoid rule with step ``h`` converges geometrically.
    Rows whose integral diverges get ``+inf``.
    """
    log_b = np.atleast_2d(np.asarray(log_b, dtype=float))
    R, k = log_b.shape
    finite = np.isfinite(log_b)
    kf = finite.sum(axis=1)
    decay = 2.0 * kf - alpha
    lam = np.where(finite, -0.5 * log_b, np.nan)
    with np.errstate(invalid="ignore"):
        lam_min = np.nanmin(np.where(finite, lam, np.inf), axis=1)
        lam_max = np.nanmax(np.where(finite, lam, -np.inf), axis=1)
    none = kf == 0
    lam_min = np.where(none, 0.0, lam_min)
    lam_max = np.where(none, 0.0, lam_max)
    out = np.full(R, np.inf)
    ok = decay > 0
    if not np.any(ok):
        return out
    idx = np.flatnonzero(ok)
    lo = lam_min[idx] - tail / alpha
    hi = lam_max[idx] + tail / decay[idx]
    counts = np.ceil((hi - lo) / h).astype(int) + 1
    row = np.repeat(np.arange(idx.size), counts)
    first = np.concatenate([[0], np.cumsum(counts)[:-1]])
    pos = np.arange(row.size) - first[row]
    lam_nodes = lo[row] + h * pos
    lb = log_b[idx][row]
    with np.errstate(invalid="ignore"):
        logv = alpha * lam_nodes - np.sum(np.logaddexp(0.0, lb + 2.0 * lam_nodes[:, None]), axis=1)
    out[idx] = _row_logsumexp(row, logv, idx.size) + math.log(h)
    return out
