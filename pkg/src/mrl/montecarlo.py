"""Monte Carlo checks of the band, the sup statistic and pointwise normality.

Replicate ``r`` always draws its sample with seed ``base_seed + r``, so a run
is reproducible and gives identical results for any number of workers.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .bands import a_of_q, pointwise_interval, simultaneous_band
from .empirical import SortedSample, cutoff_bhat, default_m, exceedances, mrl_at, mrl_curve
from .models import AnalyticModel, Exponential, Pareto

__all__ = [
    "CoverageReport",
    "ExperimentConfig",
    "band_contains",
    "band_coverage",
    "pointwise_normality",
    "pointwise_statistics",
    "sup_statistic",
    "sup_statistic_distribution",
    "variance_estimator_consistency",
]

INTERIOR_PROBES = 8


@dataclass(frozen=True)
class ExperimentConfig:
    model: AnalyticModel
    n: int
    replicates: int
    beta: float = 0.90
    m: int | None = None
    base_seed: int = 0
    workers: int = 1
    probe_x: tuple = ()

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.n < 4:
            raise ValueError("n must be at least 4")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def sample(self, r: int) -> SortedSample:
        return self.model.sample(self.n, self.base_seed + r)

    def describe(self) -> dict:
        return {
            "model": self.model.spec,
            "n": self.n,
            "replicates": self.replicates,
            "beta": self.beta,
            "m": self.m if self.m is not None else default_m(self.n),
            "m_policy": "fixed" if self.m is not None else "floor(sqrt(n))",
            "base_seed": self.base_seed,
            "workers": self.workers,
            "probe_x": list(self.probe_x),
        }


def _affine_mrl(model: AnalyticModel) -> bool:
    # |linear - e| is then piecewise linear and peaks at segment ends
    return isinstance(model, (Exponential, Pareto))


def _interior(x_lo: np.ndarray, x_hi: np.ndarray) -> np.ndarray:
    frac = np.arange(1, INTERIOR_PROBES + 1) / (INTERIOR_PROBES + 1)
    return x_lo[:, None] + (x_hi - x_lo)[:, None] * frac


def band_contains(band, model: AnalyticModel) -> bool:
    """Whether ``e`` lies inside the band at every ``x`` in ``[0, bhat]``.

    Checks every grid row (left limits and values) and, unless ``e`` is
    affine, 8 interior points of each linear piece.
    """
    e = np.asarray(model.mrl(band.x), dtype=float)
    if np.any(e < band.lower) or np.any(e > band.upper):
        return False
    if _affine_mrl(model):
        return True
    # pieces run from a value row to the following left-limit row
    starts = np.flatnonzero(~band.is_left[:-1] & band.is_left[1:])
    x_lo, x_hi = band.x[starts], band.x[starts + 1]
    xs = _interior(x_lo, x_hi)
    center = band.center[starts][:, None] - (xs - x_lo[:, None])
    half = band.half_width[starts][:, None]
    e_in = np.asarray(model.mrl(xs), dtype=float)
    return bool(np.all(np.abs(center - e_in) <= half))


def sup_statistic(sample: SortedSample, model: AnalyticModel, m: int | None = None) -> float:
    """``sup_{x <= bhat} sqrt(n) |ehat(x) - e(x)| Fbar_n(x) / S_n``.

    Evaluated on the piecewise-linear structure of ``ehat``: both one-sided
    values at each breakpoint, plus interior probes when ``e`` is not affine.
    """
    n = sample.n
    b_hat = cutoff_bhat(sample, m if m is not None else default_m(n))
    curve = mrl_curve(sample)
    bp = curve.breakpoints
    breaks = bp[(bp > 0) & (bp <= b_hat)]
    vals = sample.values

    right_x = np.concatenate(([0.0], breaks))
    right_dev = np.abs(np.asarray(mrl_at(sample, right_x)) - np.asarray(model.mrl(right_x)))
    right_sf = (n - np.searchsorted(vals, right_x, side="right")) / n
    left_dev = np.abs(np.asarray(curve.left_limit(breaks)) - np.asarray(model.mrl(breaks)))
    left_sf = (n - np.searchsorted(vals, breaks, side="left")) / n
    best = max(np.max(right_dev * right_sf), np.max(left_dev * left_sf, initial=0.0))

    if not _affine_mrl(model) and breaks.size:
        lo, hi = right_x[:-1], breaks
        xs = _interior(lo, hi)
        dev = np.abs(np.asarray(mrl_at(sample, xs)) - np.asarray(model.mrl(xs)))
        best = max(best, float(np.max(dev * right_sf[:-1, None])))
    return math.sqrt(n) * best / sample.sd


@dataclass
class CoverageReport:
    config: dict
    a: float
    coverage: float
    coverage_se: float
    pointwise: dict
    sup_stats: list
    contained: list
    runtime: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return asdict(self)


def _se(p: float, reps: int) -> float:
    return math.sqrt(p * (1.0 - p) / reps)


def _replicate(config: ExperimentConfig, r: int):
    sample = config.sample(r)
    band = simultaneous_band(sample, config.beta, config.m)
    inside = band_contains(band, config.model)
    stat = sup_statistic(sample, config.model, config.m)
    point = []
    for x in config.probe_x:
        try:
            iv = pointwise_interval(sample, x, config.beta)
        except ValueError:
            point.append(None)
            continue
        e = float(config.model.mrl(x))
        point.append(bool(iv.lower <= e <= iv.upper))
    return inside, stat, point


def _run_chunk(args):
    config, lo, hi = args
    return [_replicate(config, r) for r in range(lo, hi)]


def _map_replicates(config: ExperimentConfig, fn=_run_chunk):
    reps = config.replicates
    if config.workers == 1:
        return fn((config, 0, reps))
    size = max(1, -(-reps // (4 * config.workers)))
    chunks = [(config, lo, min(lo + size, reps)) for lo in range(0, reps, size)]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return [row for part in pool.map(fn, chunks) for row in part]


def band_coverage(config: ExperimentConfig) -> CoverageReport:
    """Fraction of replicates whose band contains ``e`` on all of ``[0, bhat]``."""
    t0 = time.perf_counter()
    config.model.residual_variance(0.0)  # bands need a finite variance
    rows = _map_replicates(config)
    contained = [bool(r[0]) for r in rows]
    stats_ = [float(r[1]) for r in rows]
    reps = config.replicates
    cov = sum(contained) / reps
    pointwise = {}
    for j, x in enumerate(config.probe_x):
        hits = [r[2][j] for r in rows if r[2][j] is not None]
        p = sum(hits) / len(hits) if hits else float("nan")
        pointwise[repr(float(x))] = {
            "coverage": p,
            "se": _se(p, len(hits)) if hits else float("nan"),
            "valid": len(hits),
        }
    return CoverageReport(
        config=config.describe(),
        a=a_of_q(config.beta),
        coverage=cov,
        coverage_se=_se(cov, reps),
        pointwise=pointwise,
        sup_stats=stats_,
        contained=contained,
        runtime=time.perf_counter() - t0,
    )


def _sup_chunk(args):
    config, lo, hi = args
    return [sup_statistic(config.sample(r), config.model, config.m) for r in range(lo, hi)]


def sup_statistic_distribution(config: ExperimentConfig) -> np.ndarray:
    return np.asarray(_map_replicates(config, _sup_chunk), dtype=float)


def _pointwise_chunk(args):
    (config, x), lo, hi = args
    e = float(config.model.mrl(x))
    out = []
    for r in range(lo, hi):
        sample = config.sample(r)
        s = exceedances(sample, x)
        if s.k < 2 or s.variance == 0.0:
            out.append(math.nan)
            continue
        out.append(math.sqrt(s.k) * (float(mrl_at(sample, x)) - e) / math.sqrt(s.variance))
    return out


def _map_with_x(config: ExperimentConfig, x: float, fn):
    reps = config.replicates
    if config.workers == 1:
        return fn(((config, x), 0, reps))
    size = max(1, -(-reps // (4 * config.workers)))
    chunks = [((config, x), lo, min(lo + size, reps)) for lo in range(0, reps, size)]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return [v for part in pool.map(fn, chunks) for v in part]


def pointwise_statistics(config: ExperimentConfig, x: float) -> np.ndarray:
    """Replicate values of ``d_n(x) = sqrt(n) (ehat - e) Fbar_n^{1/2} / S_n(x)``.

    Replicates with fewer than 2 exceedances give NaN.
    """
    if not float(config.model.sf(x)) > 0:
        raise ValueError("x must have positive survival probability")
    return np.asarray(_map_with_x(config, x, _pointwise_chunk), dtype=float)


def pointwise_normality(config: ExperimentConfig, x: float) -> float:
    """KS distance between the replicate ``d_n(x)`` and N(0, 1)."""
    d = pointwise_statistics(config, x)
    d = d[np.isfinite(d)]
    return float(stats.kstest(d, "norm").statistic)


def _variance_chunk(args):
    (config, x), lo, hi = args
    out = []
    for r in range(lo, hi):
        s = exceedances(config.sample(r), x)
        out.append(s.variance / s.sf if s.k >= 1 else math.nan)
    return out


def variance_estimator_consistency(config: ExperimentConfig, x: float) -> float:
    """Median absolute error of ``S_n^2(x) / Fbar_n(x)`` against ``sigma^2(x) / Fbar(x)``."""
    if not float(config.model.sf(x)) > 0:
        raise ValueError("x must have positive survival probability")
    target = float(config.model.residual_variance(x)) / float(config.model.sf(x))
    est = np.asarray(_map_with_x(config, x, _variance_chunk), dtype=float)
    return float(np.nanmedian(np.abs(est - target)))
