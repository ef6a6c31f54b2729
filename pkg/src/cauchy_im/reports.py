"""Monte Carlo summaries and their JSON form."""

from __future__ import annotations

import json
import math
import platform
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy
from scipy import stats

from . import __version__

__all__ = ["SimulationReport", "REPORT_SCHEMA"]

# Keys of each JSON section, in output order.
REPORT_SCHEMA = {
    "scenario": None,
    "metrics": [
        "n_sim", "ks_statistic", "ks_pvalue", "dominance_statistic", "dominance_pvalue",
        "dominance_ok", "uniform_ok", "coverage", "coverage_se", "level", "alpha",
    ],
    "provenance": ["seed", "package_version", "numpy_version", "scipy_version", "python_version"],
    "timing": ["runtime_seconds"],
}


@dataclass(frozen=True)
class SimulationReport:
    """Uniformity and coverage summary of simulated plausibilities at the truth.

    ``values`` holds the per-replicate plausibilities. Validity asks that
    P(value <= a) <= a for every a (stochastic dominance over uniform),
    tested one-sided; exactness asks for plain uniformity, tested
    two-sided. Both are Kolmogorov-Smirnov tests at level ``alpha``.
    """

    scenario: dict
    n_sim: int
    seed: int
    ks_statistic: float
    ks_pvalue: float
    dominance_statistic: float
    dominance_pvalue: float
    coverage: Optional[float] = None
    level: Optional[float] = None
    alpha: float = 0.01
    runtime: float = 0.0
    values: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @classmethod
    def from_values(cls, scenario, values, seed, level=None, alpha=0.01, runtime=0.0,
                    covered=None):
        """Build a report from per-replicate plausibilities at the truth.

        Coverage of the ``level`` plausibility interval is the fraction of
        replicates with value > 1 - level unless ``covered`` is given.
        """
        q = np.asarray(values, dtype=float)
        two = stats.kstest(q, "uniform")
        # 'greater': empirical cdf above the uniform cdf somewhere
        one = stats.kstest(q, "uniform", alternative="greater")
        cov = None
        if covered is not None:
            cov = float(np.mean(covered))
        elif level is not None:
            cov = float(np.mean(q > 1.0 - level))
        return cls(
            scenario=dict(scenario), n_sim=int(q.size), seed=int(seed),
            ks_statistic=float(two.statistic), ks_pvalue=float(two.pvalue),
            dominance_statistic=float(one.statistic), dominance_pvalue=float(one.pvalue),
            coverage=cov, level=None if level is None else float(level), alpha=float(alpha),
            runtime=float(runtime), values=q,
        )

    @property
    def coverage_se(self) -> Optional[float]:
        if self.coverage is None:
            return None
        return math.sqrt(self.coverage * (1.0 - self.coverage) / self.n_sim)

    @property
    def dominance_ok(self) -> bool:
        return self.dominance_pvalue > self.alpha

    @property
    def uniform_ok(self) -> bool:
        return self.ks_pvalue > self.alpha

    def to_dict(self, timing: bool = True) -> dict:
        metrics = {k: getattr(self, k) for k in REPORT_SCHEMA["metrics"]}
        out = {
            "scenario": dict(self.scenario),
            "metrics": metrics,
            "provenance": {
                "seed": self.seed,
                "package_version": __version__,
                "numpy_version": np.__version__,
                "scipy_version": scipy.__version__,
                "python_version": platform.python_version(),
            },
        }
        if timing:
            out["timing"] = {"runtime_seconds": self.runtime}
        return out

    def to_json(self, timing: bool = True, digits: Optional[int] = None) -> str:
        d = self.to_dict(timing)
        if digits is not None:
            d = _round(d, digits)
        return json.dumps(d, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationReport":
        m = d["metrics"]
        return cls(
            scenario=dict(d["scenario"]), n_sim=m["n_sim"], seed=d["provenance"]["seed"],
            ks_statistic=m["ks_statistic"], ks_pvalue=m["ks_pvalue"],
            dominance_statistic=m["dominance_statistic"], dominance_pvalue=m["dominance_pvalue"],
            coverage=m["coverage"], level=m["level"], alpha=m["alpha"],
            runtime=d.get("timing", {}).get("runtime_seconds", 0.0),
        )


def _round(obj, digits):
    if isinstance(obj, float):
        return round(obj, digits)
    if isinstance(obj, dict):
        return {k: _round(v, digits) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round(v, digits) for v in obj]
    return obj
