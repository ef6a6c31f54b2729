"""Command-line front end: ``cauchy-im {plaus,joint,marginal,estimate,validate}``.

Exit codes: 0 success, 1 failed check, 2 usage or parse error,
3 degenerate data. The default seed comes from ``CAUCHY_IM_SEED``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .errors import CauchyIMError, DegenerateDataError, DomainError

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2, 3
SEED_ENV = "CAUCHY_IM_SEED"


class UsageError(Exception):
    """Bad flags or unreadable input; maps to exit code 2."""


# ---------------------------------------------------------------------------
# input parsing


def read_data(path: str) -> np.ndarray:
    """Parse a data file: one decimal per line, '#' comments, blank lines skipped."""
    try:
        if path == "-":
            text = sys.stdin.read()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    values = []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            v = float(s)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: cannot parse {s!r} as a number") from None
        if not math.isfinite(v):
            raise UsageError(f"{path}:{lineno}: value {s!r} is not finite")
        values.append(v)
    if not values:
        raise UsageError(f"{path}: no data values found")
    return np.array(values)


def parse_grid(spec: str, positive: bool = False) -> np.ndarray:
    """'min:max:steps' -> evenly spaced grid of ``steps`` points."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid {spec!r} must look like min:max:steps")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        steps = int(parts[2])
    except ValueError:
        raise UsageError(f"grid {spec!r} must look like min:max:steps") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise UsageError(f"grid {spec!r}: need finite min < max")
    if steps < 2:
        raise UsageError(f"grid {spec!r}: need at least 2 steps")
    if positive and lo <= 0:
        raise UsageError(f"grid {spec!r}: values must be positive")
    return np.linspace(lo, hi, steps)


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


# ---------------------------------------------------------------------------
# output


def _fmt(v, digits):
    return f"{float(v):.{digits}f}"


def _write_csv(rows, header, out, digits):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v, digits) for v in r])
    _emit(buf.getvalue(), out)


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        try:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"{out}: {exc.strerror}") from None


def _round(obj, digits):
    if isinstance(obj, float):
        return round(obj, digits) if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _round(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v, digits) for v in obj]
    return obj


def _json_line(obj, digits):
    return json.dumps(_round(obj, digits), ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_plaus(args):
    from .conditional import cim_curve

    x = read_data(args.input)
    grid = parse_grid(args.mu_grid)
    if not args.sigma > 0:
        raise UsageError("--sigma must be positive")
    curve = cim_curve(x, args.sigma, grid, args.set_kind)
    _write_csv(curve.to_rows(), ["mu", "plausibility"], args.out, args.digits)
    return EXIT_OK


def _auto_grid(lower, upper, positive, steps=201):
    if positive:
        lo = lower / 2.0 if lower > 0 else upper / 100.0
        hi = upper * 2.0 if math.isfinite(upper) else lo * 1e3
        return np.geomspace(lo, hi, steps)
    width = upper - lower
    return np.linspace(lower - 0.5 * width, upper + 0.5 * width, steps)


def cmd_marginal(args):
    from .joint import decompose
    from .marginal import (marginal_curve, marginal_density_m, marginal_density_s,
                           marginal_interval)

    x = read_data(args.input)
    dec = decompose(x)
    dens = (marginal_density_s(dec) if args.param == "sigma" else marginal_density_m(dec)).density
    lower, upper = marginal_interval(x, args.param, args.level, args.set_kind, density=dens)
    positive = args.param == "sigma"
    grid = parse_grid(args.grid, positive) if args.grid else _auto_grid(lower, upper, positive)
    curve = marginal_curve(x, args.param, grid, args.set_kind, density=dens)
    _write_csv(curve.to_rows(), [args.param, "plausibility"], args.out, args.digits)
    summary = {"param": args.param, "level": args.level, "lower": lower, "upper": upper}
    sys.stdout.write(_json_line(summary, args.digits))
    return EXIT_OK


def cmd_joint(args):
    from .joint import decompose, joint_density_ts, joint_plausibility_region
    from .marginal import marginal_interval

    x = read_data(args.input)
    dec = decompose(x)
    if args.mu_grid:
        mu_grid = parse_grid(args.mu_grid)
    else:
        lo, hi = marginal_interval(x, "mu", 0.99, "cdf-centered")
        mu_grid = np.linspace(lo, hi, 41)
    if args.sigma_grid:
        sigma_grid = parse_grid(args.sigma_grid, positive=True)
    else:
        lo, hi = marginal_interval(x, "sigma", 0.99, "cdf-centered")
        sigma_grid = np.geomspace(lo, hi, 41)
    dens = joint_density_ts(dec)
    surf = joint_plausibility_region(dec, args.level, (mu_grid, sigma_grid), density=dens)
    _write_csv(surf.to_rows(), ["mu", "sigma", "plausibility"], args.out, args.digits)
    mask = surf.mask()
    if mask.any():
        # values are indexed [sigma, mu]
        mus = surf.mu_grid[mask.any(axis=0)]
        sig = surf.sigma_grid[mask.any(axis=1)]
        lower, upper = (float(mus.min()), float(mus.max())) if args.param == "mu" else \
            (float(sig.min()), float(sig.max()))
    else:
        lower = upper = float("nan")
    summary = {"param": args.param, "level": args.level, "lower": lower, "upper": upper}
    sys.stdout.write(_json_line(summary, args.digits))
    return EXIT_OK


def cmd_estimate(args):
    from . import estimators as est

    x = read_data(args.input)
    m = args.method
    diag = {"n": int(x.size)}
    if m == "mean":
        out = {"method": m, "estimate": est.sample_mean(x)}
    elif m == "trimmed":
        if args.trim is None:
            raise UsageError("--method trimmed requires --trim")
        diag["trimmed_per_side"] = int(math.floor(args.trim * x.size))
        out = {"method": m, "estimate": est.trimmed_mean(x, args.trim)}
    elif m == "pitman":
        if args.sigma is None:
            raise UsageError("--method pitman requires --sigma")
        if x.size < 2:
            raise DegenerateDataError("the Pitman estimator needs n > 1")
        out = {"method": m, "estimate": est.pitman_estimator(x, args.sigma)}
    else:
        r = est.mle_joint(x, seed=args.seed)
        diag.update(starts=int(r.optima.shape[0]), spread=r.spread,
                    gradient_norm=float(np.linalg.norm(r.gradient)),
                    log_likelihood=r.log_likelihood)
        out = {"method": m, "estimate": {"mu": r.mu, "sigma": r.sigma}}
    out["diagnostics"] = diag
    _emit(_json_line(out, args.digits), args.out)
    return EXIT_OK


def cmd_validate(args):
    from .validation import Scenario, uniformity_at_truth, interval_coverage

    try:
        with open(args.scenario, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise UsageError(f"{args.scenario}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.scenario}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(raw, dict):
        raise UsageError(f"{args.scenario}: scenario must be a JSON object")
    try:
        sc = Scenario.from_dict(raw)
    except (DomainError, TypeError) as exc:
        raise UsageError(f"{args.scenario}: {exc}") from None
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    if sc.n_sim >= 1000:
        rep = uniformity_at_truth(sc, seed=args.seed, workers=args.workers)
    else:
        rep = interval_coverage(sc, seed=args.seed, workers=args.workers)
    d = rep.to_dict(timing=not args.no_timing)
    _emit(json.dumps(_round(d, args.digits), indent=2, ensure_ascii=False) + "\n", args.out)
    return EXIT_OK if rep.dominance_ok else EXIT_CHECK


# ---------------------------------------------------------------------------
# parser


def _level(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{s!r} is not a number") from None
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("level must lie in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    from .engine import SET_KINDS

    p = argparse.ArgumentParser(prog="cauchy-im",
                                description="Inferential models for Cauchy location and scale.")
    p.add_argument("--digits", type=int, default=6, help="decimal places in output (default 6)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--digits", type=int, default=argparse.SUPPRESS,
                        help="decimal places in output (default 6)")
        sp.add_argument("--out", default=None, help="output file (default stdout)")

    sp = sub.add_parser("plaus", help="plausibility curve of mu with sigma known")
    sp.add_argument("input")
    sp.add_argument("--mu-grid", required=True, help="min:max:steps")
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--set-kind", choices=SET_KINDS, default="density-contour")
    common(sp)
    sp.set_defaults(func=cmd_plaus)

    sp = sub.add_parser("marginal", help="marginal plausibility curve and interval")
    sp.add_argument("input")
    sp.add_argument("--param", choices=("mu", "sigma"), default="mu")
    sp.add_argument("--level", type=_level, default=0.95)
    sp.add_argument("--grid", default=None, help="min:max:steps (default: around the interval)")
    sp.add_argument("--set-kind", choices=SET_KINDS, default="cdf-centered")
    common(sp)
    sp.set_defaults(func=cmd_marginal)

    sp = sub.add_parser("joint", help="joint plausibility surface of (mu, sigma)")
    sp.add_argument("input")
    sp.add_argument("--param", choices=("mu", "sigma"), default="mu",
                    help="which projection of the region to summarize")
    sp.add_argument("--level", type=_level, default=0.95)
    sp.add_argument("--mu-grid", default=None, help="min:max:steps")
    sp.add_argument("--sigma-grid", default=None, help="min:max:steps (positive)")
    common(sp)
    sp.set_defaults(func=cmd_joint)

    sp = sub.add_parser("estimate", help="point estimates")
    sp.add_argument("input")
    sp.add_argument("--method", choices=("mean", "trimmed", "pitman", "mle"), required=True)
    sp.add_argument("--sigma", type=float, default=None)
    sp.add_argument("--trim", type=float, default=None)
    sp.add_argument("--seed", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("validate", help="Monte Carlo validity report for a scenario file")
    sp.add_argument("--scenario", required=True, help="JSON with n, mu, sigma, method, level, n_sim")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--no-timing", action="store_true", help="omit the runtime section")
    sp.add_argument("--workers", type=int, default=1, help="worker processes (result unchanged)")
    common(sp)
    sp.set_defaults(func=cmd_validate)
    return p


_GRID_OPTIONS = ("--mu-grid", "--sigma-grid", "--grid")


def _join_grid_values(argv):
    # "--mu-grid -3:3:61" would otherwise read -3:3:61 as an option
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _GRID_OPTIONS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_grid_values(argv))
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        if args.digits < 0:
            raise UsageError("--digits must be non-negative")
        return args.func(args)
    except UsageError as exc:
        print(f"cauchy-im: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateDataError as exc:
        print(f"cauchy-im: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DomainError as exc:
        print(f"cauchy-im: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CauchyIMError as exc:
        print(f"cauchy-im: numerical failure: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
