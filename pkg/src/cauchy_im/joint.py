"""Joint IM for (mu, sigma) from the order-statistic decomposition.

Sorting the data, X_(1) = mu + sigma T and X_(2) - X_(1) = sigma S with
T = U_(1), S = U_(2) - U_(1); the ratios W_i = (X_(i) - X_(1))/(X_(2) - X_(1))
are ancillary. Given W = w the pair (T, S) has density proportional to

    s^(n-2) prod_{i=1..n} 1/(1 + (t + w_i s)^2),    w_1 = 0, w_2 = 1.

The density is tabulated on a grid in (m, lambda) = (t/s, log s): a
trapezoid rule in lambda and, on each lambda row, a graded Gauss-Legendre
rule in m adapted to the Lorentzian factors centred at -w_i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize

from .errors import DegenerateDataError, DomainError
from .quadrature import integrate, lorentzian_panels, lorentzian_rule, normalize

__all__ = [
    "AncillaryDecomposition",
    "decompose",
    "GridDensity2D",
    "full_w",
    "joint_density_ts",
    "joint_plausibility",
    "PlausibilitySurface",
    "joint_plausibility_region",
]


@dataclass(frozen=True)
class AncillaryDecomposition:
    """Smallest order statistic, lowest spacing and the scaled spacings w_3..w_n."""

    x1: float
    spacing: float
    w: tuple

    def __post_init__(self):
        if not self.spacing > 0:
            raise DegenerateDataError("spacing X(2) - X(1) must be positive")
        w = tuple(float(v) for v in self.w)
        if any(v < 1 for v in w) or any(b < a for a, b in zip(w, w[1:])):
            raise DomainError("w must be nondecreasing with every entry >= 1")
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return len(self.w) + 2

    @property
    def w_full(self) -> np.ndarray:
        """(0, 1, w_3, ..., w_n)."""
        return np.concatenate([[0.0, 1.0], self.w])

    def to_aux(self, mu0, sigma0):
        """Auxiliary point (t0, s0) for a parameter value."""
        sigma0 = np.asarray(sigma0, dtype=float)
        if np.any(sigma0 <= 0):
            raise DomainError("sigma must be positive")
        return (self.x1 - np.asarray(mu0, dtype=float)) / sigma0, self.spacing / sigma0


def decompose(data) -> AncillaryDecomposition:
    """Order-statistic decomposition of a sample of size n >= 2."""
    x = np.sort(np.asarray(data, dtype=float).ravel())
    if x.size < 2:
        raise DomainError("need at least two observations")
    if not np.all(np.isfinite(x)):
        raise DomainError("data must be finite")
    d = x[1] - x[0]
    if d <= 0:
        raise DegenerateDataError("degenerate sample: tie at the minimum")
    w = (x[2:] - x[0]) / d
    return AncillaryDecomposition(float(x[0]), float(d), tuple(np.maximum(w, 1.0)))


def _upper_decay(w_full):
    """Power-law decay rate of the log-scale marginal as s -> inf.

    With k the largest number of coinciding centres the t-integral falls
    like s^(-2(n-k)), leaving s^(2k-n-1) after the Jacobian.
    """
    n = w_full.size
    _, counts = np.unique(w_full, return_counts=True)
    return n + 1 - 2 * int(counts.max())


def log_ts_kernel(t, s, w_full):
    """Unnormalized log density of (T, S) given W."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    n = w_full.size
    d = t[..., None] + w_full * s[..., None]
    with np.errstate(divide="ignore"):
        return (n - 2) * np.log(s) - np.sum(np.log1p(d * d), axis=-1)


class _Rows:
    """The (T, S) density restricted to rows of constant lambda = log s.

    On row lambda the density is a function of m = t/s. Each row is cut
    into the panels of :func:`lorentzian_panels` (tails included), every
    panel carrying a local coordinate y in [-1, 1] with m increasing in y.
    ``log_norm`` is the log normalizing constant of the kernel; values are
    normalized log densities in (t, s).
    """

    def __init__(self, lam, w_full, log_norm=0.0, order=12):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        R = lam.size
        n = w_full.size
        s = np.exp(lam)
        prow, pa, pb, tl, tr, L = lorentzian_panels(np.broadcast_to(-w_full, (R, n)), 1.0 / s)
        row = np.concatenate([np.arange(R), prow, np.arange(R)])
        kind = np.concatenate([-np.ones(R, int), np.zeros(prow.size, int), np.ones(R, int)])
        A = np.concatenate([tl, 0.5 * (pa + pb), tr])
        B = np.concatenate([L, 0.5 * (pb - pa), L])
        o = np.argsort(row, kind="stable")
        self.row, self.kind, self.A, self.B = row[o], kind[o], A[o], B[o]
        self.lam, self.s, self.w_full, self.log_norm = lam, s, w_full, log_norm
        self.R = R
        self.gy, self.gw = np.polynomial.legendre.leggauss(order)
        self.ys = np.concatenate([[-1.0], self.gy, [1.0]])
        P = self.row.size
        self.logf = self.value(np.arange(P)[:, None], np.broadcast_to(self.ys, (P, self.ys.size)))
        _, jac = self.map(np.arange(P)[:, None], self.gy[None, :])
        dens = np.exp(self.logf[:, 1:-1] + 2.0 * lam[self.row][:, None]) * jac
        self.panel_mass = dens @ self.gw
        self._extrema = None

    def map(self, p, y):
        kind = self.kind[p]
        A = self.A[p]
        B = self.B[p]
        tau = np.where(kind < 0, 0.5 * (1.0 - y), 0.5 * (1.0 + y))
        with np.errstate(divide="ignore", invalid="ignore"):
            off = tau / (1.0 - tau)
            tj = 0.5 * B / (1.0 - tau) ** 2
            m = np.where(kind == 0, A + B * y, A + kind * B * off)
        return m, np.where(kind == 0, B, tj)

    def value(self, p, y):
        m, _ = self.map(p, y)
        s = self.s[self.row[p]]
        d = (m * s)[..., None] + self.w_full * s[..., None]
        with np.errstate(invalid="ignore", over="ignore"):
            out = (self.w_full.size - 2) * np.log(s) - np.sum(np.log1p(d * d), axis=-1) - self.log_norm
        return np.where(np.isfinite(m), out, -np.inf)

    def slope(self, p, y):
        """Sign-carrying derivative of the log density along m."""
        m, _ = self.map(p, y)
        s = self.s[self.row[p]]
        u = (m[..., None] + self.w_full) * s[..., None]
        with np.errstate(invalid="ignore"):
            out = -np.sum(2.0 * u / (1.0 + u * u), axis=-1)
        return np.where(np.isfinite(m), out, np.where(m < 0, 1.0, -1.0))

    def row_mass(self):
        return np.bincount(self.row, weights=self.panel_mass, minlength=self.R)

    # -- local extrema along each row --------------------------------------
    def extrema(self):
        """(panel, y, log value, is_max) of every interior local extremum."""
        if self._extrema is None:
            P = self.row.size
            d = self.slope(np.arange(P)[:, None], np.broadcast_to(self.ys, (P, self.ys.size)))
            sg = d > 0
            pi, ki = np.nonzero(sg[:, 1:] != sg[:, :-1])
            y = _illinois(lambda i, yy: self.slope(pi[i], yy), self.ys[ki], self.ys[ki + 1],
                          d[pi, ki], d[pi, ki + 1])
            self._extrema = (pi, y, self.value(pi, y), sg[pi, ki])
        return self._extrema

    def counts(self, c):
        """Number of connected pieces of {log f > c} on each row."""
        pi, _, val, is_max = self.extrema()
        up = val > self._levels(c)[self.row[pi]]
        cnt = np.bincount(self.row[pi], weights=np.where(is_max, 1.0, -1.0) * up, minlength=self.R)
        return np.rint(cnt).astype(int)

    def _levels(self, c):
        # scalar level or one level per row
        return np.broadcast_to(np.asarray(c, dtype=float), (self.R,))

    def extremum_gap(self, c):
        """Per row, the smallest |value - c| over interior extrema (inf if none)."""
        pi, _, val, _ = self.extrema()
        out = np.full(self.R, np.inf)
        np.minimum.at(out, self.row[pi], np.abs(val - self._levels(c)[self.row[pi]]))
        return out

    def mass_above(self, c):
        """Per-row integral of f s^2 dm over {log f > c}; ``c`` may be per row."""
        lf = self.logf
        cp = self._levels(c)[self.row]
        above = lf > cp[:, None]
        full = above.all(axis=1)
        out = np.bincount(self.row[full], weights=self.panel_mass[full], minlength=self.R).astype(float)
        # sample brackets: consecutive samples, plus brackets split at interior extrema
        pi, ye, ve, _ = self.extrema()
        cand = ~full & above.any(axis=1)
        cand[pi[ve > cp[pi]]] = True
        cand &= ~full
        part = np.flatnonzero(cand)
        if part.size == 0:
            return out
        idx = np.full(self.row.size, -1)
        idx[part] = np.arange(part.size)
        ys = np.broadcast_to(self.ys, (part.size, self.ys.size))
        sel = idx[pi] >= 0
        bp_p = np.concatenate([np.repeat(np.arange(part.size), self.ys.size), idx[pi[sel]]])
        bp_y = np.concatenate([ys.ravel(), ye[sel]])
        bp_v = np.concatenate([(lf[part] - cp[part][:, None]).ravel(), ve[sel] - cp[pi[sel]]])
        o = np.lexsort((bp_y, bp_p))
        bp_p, bp_y, bp_v = bp_p[o], bp_y[o], bp_v[o]
        same = bp_p[1:] == bp_p[:-1]
        flip = same & ((bp_v[1:] > 0) != (bp_v[:-1] > 0))
        k = np.flatnonzero(flip)
        kp = part[bp_p[k]]
        roots = _illinois(lambda i, yy: self.value(kp[i], yy) - cp[kp[i]], bp_y[k], bp_y[k + 1],
                          bp_v[k], bp_v[k + 1])
        cut_p = np.concatenate([np.arange(part.size), np.arange(part.size), bp_p[k]])
        cut_y = np.concatenate([np.full(part.size, -1.0), np.full(part.size, 1.0), roots])
        o = np.lexsort((cut_y, cut_p))
        cut_p, cut_y = cut_p[o], cut_y[o]
        same = cut_p[1:] == cut_p[:-1]
        pan, ya, yb = part[cut_p[:-1][same]], cut_y[:-1][same], cut_y[1:][same]
        keep = (yb > ya) & (self.value(pan, 0.5 * (ya + yb)) > cp[pan])
        pan, ya, yb = pan[keep], ya[keep], yb[keep]
        if pan.size:
            yy = 0.5 * (ya + yb)[:, None] + 0.5 * (yb - ya)[:, None] * self.gy
            _, jac = self.map(pan[:, None], yy)
            dens = np.exp(self.value(pan[:, None], yy) + 2.0 * self.lam[self.row[pan]][:, None]) * jac
            out += np.bincount(self.row[pan], weights=0.5 * (yb - ya) * (dens @ self.gw),
                               minlength=self.R)
        return out


def _illinois(func, a, b, fa, fb, iters=80):
    """Vectorized Illinois (modified regula falsi) on brackets [a, b].

    ``func`` receives the bracket indices being updated along with the
    trial points, so converged brackets drop out of later sweeps.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    if a.size == 0:
        return a
    fa = np.clip(np.where(np.isnan(fa), -1e300, fa), -1e300, 1e300)
    fb = np.clip(np.where(np.isnan(fb), -1e300, fb), -1e300, 1e300)
    act = np.arange(a.size)
    for _ in range(iters):
        aa, bb, fa_, fb_ = a[act], b[act], fa[act], fb[act]
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            x = (aa * fb_ - bb * fa_) / (fb_ - fa_)
        x = np.where((x > np.minimum(aa, bb)) & (x < np.maximum(aa, bb)), x, 0.5 * (aa + bb))
        fx = np.clip(np.nan_to_num(func(act, x), nan=-1e300), -1e300, 1e300)
        flip = (fx > 0) != (fb_ > 0)
        a[act] = np.where(flip, bb, aa)
        fa[act] = np.where(flip, fb_, 0.5 * fa_)
        b[act], fb[act] = x, fx
        going = ~((np.abs(x - a[act]) < 1e-15 * (1.0 + np.abs(x))) | (fx == 0))
        act = act[going]
        if act.size == 0:
            break
    return b


class GridDensity2D:
    """Normalized density of (T, S) given W on t in R, s > 0.

    The normalizing constant comes from a trapezoid rule in lambda = log s
    over rows of :class:`_Rows`, which is geometrically convergent because
    the row integral is analytic in a strip about the real lambda axis.

    Attributes
    ----------
    t_nodes, s_nodes : ndarray
        Quadrature nodes (flattened).
    masses : ndarray
        Probability attached to each node; sums to 1.
    log_values : ndarray
        Normalized log density at the nodes.
    log_norm : float
        Log normalizing constant of the kernel.
    """

    domain = "half-plane"

    def __init__(self, w_full, h=0.25, order=12, tail=45.0):
        w_full = np.asarray(w_full, dtype=float)
        n = w_full.size
        decay = _upper_decay(w_full)
        if decay <= 0:
            raise DegenerateDataError("tied observations make the (T, S) density improper")
        self.w_full = w_full
        self.n = n
        self.h = h
        self.order = order
        gaps = np.diff(np.unique(w_full))
        lam_lo = -math.log(w_full.max()) - tail / (n - 1)
        lam_hi = -math.log(gaps.min()) + tail / decay
        lam = np.arange(lam_lo, lam_hi + h, h)
        rows = _Rows(lam, w_full, 0.0, order)
        rm = rows.row_mass() * h
        self.log_norm = float(math.log(rm.sum()))
        rows = _Rows(lam, w_full, self.log_norm, order)
        self._rows = rows
        self.lam_range = (float(lam[0]), float(lam[-1]))
        P = rows.row.size
        m, jac = rows.map(np.arange(P)[:, None], rows.gy[None, :])
        sr = rows.s[rows.row][:, None]
        self.t_nodes = (m * sr).ravel()
        self.s_nodes = np.broadcast_to(sr, m.shape).ravel()
        self.log_values = rows.logf[:, 1:-1].ravel()
        self.masses = (np.exp(rows.logf[:, 1:-1] + 2.0 * rows.lam[rows.row][:, None]) * jac
                       * rows.gw * h).ravel()

    def logpdf(self, t, s):
        s = np.asarray(s, dtype=float)
        out = np.where(s > 0, log_ts_kernel(t, np.where(s > 0, s, 1.0), self.w_full) - self.log_norm,
                       -np.inf)
        return out if out.ndim else float(out)

    def pdf(self, t, s):
        return np.exp(self.logpdf(t, s))

    def _scan_rows(self, scan=4):
        if getattr(self, "_scan", None) is None:
            base = self._rows.lam
            f = np.linspace(0.0, 1.0, scan + 1)[:-1]
            lam = np.concatenate([(base[:-1, None] + np.diff(base)[:, None] * f).ravel(), base[-1:]])
            self._scan = _Rows(lam, self.w_full, self.log_norm, self.order)
        return self._scan

    def _critical_lams(self, levels, tol=1e-10):
        """lambda values where the number of pieces of {log f > c} on a row changes.

        A change needs some row extremum to cross c. Along lambda the
        extremum values move with slope at most n + 2 in absolute value, so
        an interval whose end extrema all sit farther than (n + 2) * width / 2
        from c holds no change. Other intervals are halved until they are
        narrower than ``tol``; those whose end counts differ give the
        critical values. Returns (lambda, level index) pairs sorted by both.
        """
        levels = np.atleast_1d(np.asarray(levels, dtype=float))
        rows = self._scan_rows()
        lam = rows.lam
        slope = self.w_full.size + 2.0
        parts = []
        for k, c in enumerate(levels):
            cnt, gap = rows.counts(c), rows.extremum_gap(c)
            live = (cnt[1:] != cnt[:-1]) | (np.minimum(gap[1:], gap[:-1]) <= 0.5 * slope * np.diff(lam))
            j = np.flatnonzero(live)
            parts.append((np.full(j.size, k), lam[j], lam[j + 1], cnt[j], cnt[j + 1], gap[j], gap[j + 1]))
        li, a, b, ca, cb, ga, gb = (np.concatenate(v) for v in zip(*parts))
        crit_l, crit_k = [], []
        for _ in range(80):
            live = (ca != cb) | (np.minimum(ga, gb) <= 0.5 * slope * (b - a))
            li, a, b, ca, cb, ga, gb = (v[live] for v in (li, a, b, ca, cb, ga, gb))
            done = b - a < tol
            hit = done & (ca != cb)
            crit_l.append(0.5 * (a + b)[hit])
            crit_k.append(li[hit])
            li, a, b, ca, cb, ga, gb = (v[~done] for v in (li, a, b, ca, cb, ga, gb))
            if a.size == 0:
                break
            mid = 0.5 * (a + b)
            cm, gm = self._counts(mid, levels[li])
            li = np.concatenate([li, li])
            a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
            ca, cb = np.concatenate([ca, cm]), np.concatenate([cm, cb])
            ga, gb = np.concatenate([ga, gm]), np.concatenate([gm, gb])
        crit_l, crit_k = np.concatenate(crit_l), np.concatenate(crit_k)
        o = np.lexsort((crit_l, crit_k))
        return crit_l[o], crit_k[o]

    def _counts(self, lam, c, chunk=4096):
        """Piece counts and the distance from c to the nearest row extremum."""
        c = np.broadcast_to(np.asarray(c, dtype=float), lam.shape)
        cnt = np.empty(lam.size, dtype=int)
        gap = np.empty(lam.size)
        for i in range(0, lam.size, chunk):
            rows = _Rows(lam[i:i + chunk], self.w_full, self.log_norm, self.order)
            cnt[i:i + chunk] = rows.counts(c[i:i + chunk])
            gap[i:i + chunk] = rows.extremum_gap(c[i:i + chunk])
        return cnt, gap

    def _row_mass_above(self, lam, c, chunk=4096):
        out = np.empty(lam.size)
        for i in range(0, lam.size, chunk):
            out[i:i + chunk] = _Rows(lam[i:i + chunk], self.w_full, self.log_norm,
                                     self.order).mass_above(c[i:i + chunk])
        return out

    def mass_above(self, log_level, piece=2.0, q=12, tol=1e-10, max_depth=40):
        """P(log f(T, S) > log_level); vectorized over ``log_level``.

        Rows are integrated exactly in m (crossings located, partial panels
        re-integrated). Across rows the lambda axis is split at the values
        where the level set gains or loses pieces; there the row mass has
        a square-root onset, removed by lambda = a + l v^2. Each piece is
        integrated by Gauss-Legendre and halved until the halves agree with
        the whole to ``tol``, which also resolves shoulders of the level
        curve that change no piece count.
        """
        lv = np.asarray(log_level, dtype=float)
        # within 1e-12 of the peak the superlevel set has mass O(1e-12); refining
        # the tangency there would bisect to the tolerance floor for nothing
        lv = np.where(lv >= self.max_logpdf() - 1e-12, np.inf, lv)
        levels, inv = np.unique(lv.ravel(), return_inverse=True)
        inv = inv.ravel()
        # unique sorts, so a peak level is last; it maps to the appended zero
        levels = levels[np.isfinite(levels)]
        if not levels.size:
            out = np.zeros(lv.shape)
            return out if out.ndim else float(out)
        crit, ck = self._critical_lams(levels)
        lo, hi = self.lam_range
        li, a, b, sl, sr = [], [], [], [], []
        for k in range(levels.size):
            cr = crit[ck == k]
            edges = np.concatenate([[lo], cr, [hi]])
            for e, (ea, eb) in enumerate(zip(edges[:-1], edges[1:])):
                if eb <= ea:
                    continue
                cuts = np.linspace(ea, eb, max(2, int(math.ceil((eb - ea) / piece))) + 1)
                m = cuts.size - 1
                li.append(np.full(m, k))
                a.append(cuts[:-1])
                b.append(cuts[1:])
                sl.append(np.r_[e > 0, np.zeros(m - 1, bool)])
                sr.append(np.r_[np.zeros(m - 1, bool), e < cr.size])
        li, a, b, sl, sr = (np.concatenate(v) for v in (li, a, b, sl, sr))
        gy, gw = np.polynomial.legendre.leggauss(q)
        v = 0.5 * (gy + 1.0)
        wv = 0.5 * gw

        def estimate(li, a, b, sl, sr):
            ell = (b - a)[:, None]
            lam = np.where(sl[:, None], a[:, None] + ell * v * v,
                           np.where(sr[:, None], b[:, None] - ell * v * v, a[:, None] + ell * v))
            wts = np.where((sl | sr)[:, None], 2.0 * ell * v * wv, ell * wv)
            vals = self._row_mass_above(lam.ravel(), np.repeat(levels[li], q))
            return np.sum(wts * vals.reshape(lam.shape), axis=1)

        whole = estimate(li, a, b, sl, sr)
        total = np.zeros(levels.size)
        for depth in range(max_depth):
            mid = 0.5 * (a + b)
            no = np.zeros(a.size, bool)
            left = estimate(li, a, mid, sl, no)
            right = estimate(li, mid, b, no, sr)
            ok = np.abs(left + right - whole) <= tol
            if depth == max_depth - 1:
                ok[:] = True
            total += np.bincount(li[ok], weights=(left + right)[ok], minlength=levels.size)
            bad = ~ok
            if not bad.any():
                break
            li = np.r_[li[bad], li[bad]]
            a, b = np.r_[a[bad], mid[bad]], np.r_[mid[bad], b[bad]]
            sl, sr = np.r_[sl[bad], no[bad]], np.r_[no[bad], sr[bad]]
            whole = np.r_[left[bad], right[bad]]
        total = np.r_[np.clip(total, 0.0, 1.0), 0.0]
        out = total[inv].reshape(lv.shape)
        return out if out.ndim else float(out)

    def mass_below(self, log_level):
        """P(log f(T, S) <= log_level); vectorized over ``log_level``."""
        lv = np.asarray(log_level, dtype=float)
        out = np.zeros(lv.shape)
        fin = np.isfinite(lv)
        out[lv == np.inf] = 1.0
        if fin.any():
            out[fin] = 1.0 - self.mass_above(lv[fin])
        out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)

    def max_logpdf(self):
        """Largest value of the log density."""
        if not hasattr(self, "_top"):
            self._top = float(self.logpdf(*self.mode()))
        return self._top

    def mode(self):
        """(t, s) maximizing the density."""
        i = int(np.argmax(self.log_values))
        x0 = np.array([self.t_nodes[i], math.log(self.s_nodes[i])])
        res = minimize(lambda z: -float(self.logpdf(z[0], math.exp(z[1]))), x0, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
        return float(res.x[0]), float(math.exp(res.x[1]))

    def probability(self, t_bounds=(-math.inf, math.inf), s_bounds=(0.0, math.inf), rtol=1e-9):
        """P(T in t_bounds, S in s_bounds) by iterated adaptive quadrature."""
        ta, tb = map(float, t_bounds)
        sa, sb = map(float, s_bounds)
        sa = max(sa, 0.0)
        if tb <= ta or sb <= sa:
            return 0.0
        w = self.w_full

        def inner(s):
            return integrate(lambda t: self.pdf(t, s), ta, tb, rtol=rtol * 0.1,
                             points=np.clip(-w * s, ta, tb) if math.isfinite(ta) or math.isfinite(tb)
                             else -w * s, scale=max(1.0, s)).value

        def outer(s_arr):
            s_arr = np.asarray(s_arr, dtype=float)
            return np.array([inner(v) for v in s_arr.ravel()]).reshape(s_arr.shape)

        return float(integrate(outer, sa, sb, rtol=rtol, points=[1.0]).value)

    def marginal_s(self, s):
        """Density of S at ``s`` (t integrated out)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.array([integrate(lambda t: self.pdf(t, v), points=-self.w_full * v,
                                  scale=max(1.0, v)).value for v in s])
        return out

    def sample(self, size, rng):
        """Draws of (T, S): S by inversion of its marginal, T | S by panel rejection."""
        s_dens = self._s_density()
        s = s_dens.quantile(rng.random(size))
        t = np.empty(size)
        chunk = 2048
        for start in range(0, size, chunk):
            t[start:start + chunk] = _sample_t_given_s(s[start:start + chunk], self.w_full, rng)
        return t, s

    def _s_density(self):
        if not hasattr(self, "_sd"):
            from .marginal import marginal_density_s

            self._sd = marginal_density_s(self.w_full[2:]).density
        return self._sd


def _log_lorentz(t, centers):
    d = t[..., None] - centers
    return -np.sum(np.log1p(d * d), axis=-1)


def _sample_t_given_s(s, w_full, rng, order=12, slack=1.5):
    """Exact draws from T | S = s, one per entry of ``s``.

    Pieces are the finite panels of :func:`lorentzian_panels` plus the two
    tails. A piece is picked with probability proportional to its
    Gauss-Legendre mass; within it a draw is made by rejection, from a
    uniform proposal under ``slack`` times the largest nodal value on
    finite panels, and from the nearest Cauchy factor on the tails, scaled by the
    remaining factors at the start of the tail.
    """
    R = s.size
    centers = -np.outer(s, w_full)
    prow, pa, pb, tl, tr, L = lorentzian_panels(centers, np.ones(R))
    xg, wg = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (pb - pa)
    nodes = 0.5 * (pa + pb)[:, None] + half[:, None] * xg
    c_p = centers[prow][:, None, :]
    f = np.exp(_log_lorentz(nodes, c_p))
    pmass = half * (f @ wg)
    ends = np.exp(_log_lorentz(np.column_stack([pa, pb]), c_p))
    env = slack * np.maximum(f.max(axis=1), ends.max(axis=1))

    xt, wt = np.polynomial.legendre.leggauss(order)
    tau = 0.5 * (xt + 1.0)
    off = tau / (1.0 - tau)
    jac = 0.5 * wt / (1.0 - tau) ** 2
    cr = centers[:, None, :]
    mr = L * (np.exp(_log_lorentz(tr[:, None] + L[:, None] * off, cr)) @ jac)
    ml = L * (np.exp(_log_lorentz(tl[:, None] - L[:, None] * off, cr)) @ jac)

    # pieces per row: finite panels then left tail (-1) and right tail (+1)
    row = np.concatenate([prow, np.arange(R), np.arange(R)])
    kind = np.concatenate([np.zeros(prow.size, int), -np.ones(R, int), np.ones(R, int)])
    lo = np.concatenate([pa, np.full(R, -np.inf), tr])
    hi = np.concatenate([pb, tl, np.full(R, np.inf)])
    mass = np.concatenate([pmass, ml, mr])
    envs = np.concatenate([env, np.ones(R), np.ones(R)])
    o = np.argsort(row, kind="stable")
    row, kind, lo, hi, mass, envs = row[o], kind[o], lo[o], hi[o], mass[o], envs[o]
    cum = np.cumsum(mass)
    first = np.searchsorted(row, np.arange(R))
    base = np.where(first > 0, cum[first - 1], 0.0)
    total = cum[np.append(first[1:], row.size) - 1] - base
    piece = np.searchsorted(cum, base + rng.random(R) * total, side="right")
    last = np.append(first[1:], row.size) - 1
    piece = np.clip(piece, first, last)

    out = np.empty(R)
    todo = np.arange(R)
    cmin = centers.min(axis=1)
    cmax = centers.max(axis=1)
    while todo.size:
        k = piece[todo]
        kd = kind[k]
        u1 = rng.random(todo.size)
        u2 = rng.random(todo.size)
        v = np.empty(todo.size)
        fin = kd == 0
        v[fin] = lo[k[fin]] + (hi[k[fin]] - lo[k[fin]]) * u1[fin]
        # tails: Cauchy centred at the nearest extreme centre, restricted to the tail
        rt = kd == 1
        c = np.where(rt, cmax[todo], cmin[todo])
        start = np.where(rt, lo[k], -hi[k])
        cc = np.where(rt, c, -c)
        p0 = np.arctan(start - cc) / math.pi + 0.5
        with np.errstate(over="ignore"):
            dist = np.tan(math.pi * (p0 + (1.0 - p0) * u1 - 0.5))
        vt = cc + dist
        v[~fin] = np.where(rt, vt, -vt)[~fin]
        lf = _log_lorentz(v, centers[todo])
        # beyond the outermost centre every factor decreases, so the others are
        # bounded by their values at the start of the tail
        edge = np.where(fin, 0.0, start * np.where(rt, 1.0, -1.0))
        others = np.where(fin, 0.0, _log_lorentz(edge, centers[todo]) + np.log1p((edge - c) ** 2))
        bound = np.where(fin, np.log(envs[k]), others - np.log1p((v - c) ** 2))
        ok = np.log(u2) <= lf - bound
        ok &= np.isfinite(v)
        out[todo[ok]] = v[ok]
        todo = todo[~ok]
    return out


def full_w(w, n: Optional[int] = None) -> np.ndarray:
    """Validated (0, 1, w_3, ..., w_n) from w_3..w_n or a decomposition."""
    if isinstance(w, AncillaryDecomposition):
        return w.w_full
    w = np.asarray(w, dtype=float).ravel()
    if n is None:
        n = w.size + 2
    if n < 2:
        raise DomainError("need n >= 2")
    if w.size != n - 2:
        raise DomainError(f"w must have length n - 2 = {n - 2}, got {w.size}")
    if np.any(w < 1) or np.any(np.diff(w) < 0):
        raise DomainError("w must be nondecreasing with every entry >= 1")
    return np.concatenate([[0.0, 1.0], w])


def joint_density_ts(w, n: Optional[int] = None, **grid) -> GridDensity2D:
    """(T, S) | W density for the ancillary vector ``w`` (= w_3..w_n)."""
    return GridDensity2D(full_w(w, n), **grid)


def joint_plausibility(data, mu0, sigma0, random_set="density-contour", density=None):
    """Contour plausibility of (mu0, sigma0): P(f(T, S) <= f(t0, s0)).

    Only the density-contour family is defined for the pair.
    """
    if random_set not in ("density-contour", None) and getattr(random_set, "kind", None) != "density-contour":
        from .errors import CapabilityError

        raise CapabilityError("the joint IM supports density-contour sets only")
    dec = data if isinstance(data, AncillaryDecomposition) else decompose(data)
    dens = density if density is not None else joint_density_ts(dec)
    t0, s0 = dec.to_aux(mu0, sigma0)
    out = dens.mass_below(dens.logpdf(t0, s0))
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class PlausibilitySurface:
    """Joint plausibility on a (mu, sigma) grid; ``values[j, i]`` is at (mu_i, sigma_j)."""

    mu_grid: np.ndarray
    sigma_grid: np.ndarray
    values: np.ndarray
    level: Optional[float] = None

    def mask(self, level: Optional[float] = None):
        level = self.level if level is None else level
        if level is None:
            raise DomainError("no level given")
        if level <= 0:
            return np.zeros(self.values.shape, bool)
        return self.values > 1.0 - level

    def to_rows(self):
        mm, ss = np.meshgrid(self.mu_grid, self.sigma_grid)
        return list(zip(mm.ravel().tolist(), ss.ravel().tolist(), self.values.ravel().tolist()))


def joint_plausibility_region(data, level, grid2d, density=None, n_levels=80) -> PlausibilitySurface:
    """Plausibility surface over ``grid2d = (mu_grid, sigma_grid)``.

    The contour mass H(c) = P(log f(T, S) <= c) is evaluated exactly at
    ``n_levels`` log-levels spanning the grid's values and interpolated
    monotonically (PCHIP) in between; ``n_levels=None`` evaluates every
    grid point exactly.
    """
    mu_grid = np.asarray(grid2d[0], dtype=float)
    sigma_grid = np.asarray(grid2d[1], dtype=float)
    if np.any(sigma_grid <= 0):
        raise DomainError("sigma grid must be positive")
    if not 0 <= level < 1:
        raise DomainError("level must lie in [0, 1)")
    dec = data if isinstance(data, AncillaryDecomposition) else decompose(data)
    dens = density if density is not None else joint_density_ts(dec)
    mm, ss = np.meshgrid(mu_grid, sigma_grid)
    if n_levels is None or mm.size <= n_levels:
        vals = joint_plausibility(dec, mm, ss, density=dens)
        return PlausibilitySurface(mu_grid, sigma_grid, np.asarray(vals), level)
    t0, s0 = dec.to_aux(mm, ss)
    c = np.asarray(dens.logpdf(t0, s0), dtype=float)
    top = float(dens.logpdf(*dens.mode()))
    lo = float(c.min())
    hi = min(float(c.max()), top)
    # levels at quantiles of the requested values, plus an even spread
    q = np.quantile(np.minimum(c, hi), np.linspace(0.0, 1.0, n_levels))
    levels = np.unique(np.concatenate([q, np.linspace(lo, hi, max(2, n_levels // 4))]))
    H = np.asarray(dens.mass_below(levels), dtype=float)
    H = np.maximum.accumulate(H)
    if levels.size >= 2:
        vals = PchipInterpolator(levels, H, extrapolate=False)(np.minimum(c, hi))
    else:
        vals = np.full(c.shape, H[0])
    vals = np.where(c >= top, 1.0, vals)
    return PlausibilitySurface(mu_grid, sigma_grid, np.clip(vals, 0.0, 1.0), level)
