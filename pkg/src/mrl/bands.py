"""Confidence statements for the mean residual life function.

The simultaneous band is ``ehat(x) +/- a * S_n / (sqrt(n) * Fbar_n(x))`` on
``[0, bhat]``, where ``a`` solves ``Q(a) = beta`` and ``Q`` is the law of the
sup of |standard Brownian motion| over ``[0, 1]``.  Pointwise intervals and
two-point ellipses use the local exceedance variance instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .empirical import (
    SortedSample,
    cutoff_bhat,
    default_m,
    exceedances,
    mrl_at,
    mrl_curve,
)

__all__ = [
    "BandResult",
    "EllipseResult",
    "PointwiseInterval",
    "SMALL_K",
    "a_of_q",
    "joint_ellipse",
    "normal_sf",
    "pointwise_interval",
    "q_of_a",
    "q_of_a_tail",
    "simultaneous_band",
]

SMALL_K = 30
_SERIES_SWITCH = 0.5
_SQRT2 = math.sqrt(2.0)


def normal_sf(z: float) -> float:
    """Standard normal upper tail probability."""
    return 0.5 * math.erfc(z / _SQRT2)


def _q_normal_series(a: float) -> float:
    # 1 - 4 * (Phibar(a) - Phibar(3a) + Phibar(5a) - ...)
    total = 0.0
    k = 0
    while True:
        term = normal_sf((2 * k + 1) * a)
        total += term if k % 2 == 0 else -term
        if term < 1e-16:
            break
        k += 1
    return 1.0 - 4.0 * total


def _q_theta_series(a: float) -> float:
    # (4/pi) * sum_k (-1)^k / (2k+1) * exp(-(2k+1)^2 pi^2 / (8 a^2)); fast for small a
    total = 0.0
    k = 0
    c = math.pi**2 / (8.0 * a * a)
    while True:
        j = 2 * k + 1
        term = math.exp(-j * j * c) / j
        total += term if k % 2 == 0 else -term
        if term < 1e-17:
            break
        k += 1
    return 4.0 / math.pi * total


def q_of_a(a: float) -> float:
    """``P(sup_{0<=t<=1} |W(t)| < a)`` for standard Brownian motion ``W``.

    For ``a >= 0.5`` this sums the alternating normal-tail series; for
    smaller ``a``, where that series converges slowly, the equivalent
    theta-function series is used.
    """
    if not a > 0:
        return 0.0
    if math.isinf(a):
        return 1.0
    q = _q_normal_series(a) if a >= _SERIES_SWITCH else _q_theta_series(a)
    return min(max(q, 0.0), 1.0)


def q_of_a_tail(a: float) -> float:
    """One-term approximation ``1 - 4 Phibar(a)``."""
    return 1.0 - 4.0 * normal_sf(a)


@lru_cache(maxsize=256)
def a_of_q(beta: float) -> float:
    """Invert :func:`q_of_a` by bisection on ``[1e-8, 10]``."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    lo, hi = 1e-8, 10.0
    while hi - lo > 1e-14 * hi:
        mid = 0.5 * (lo + hi)
        if q_of_a(mid) < beta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def normal_quantile(p: float) -> float:
    return float(special.ndtri(p))


@dataclass(frozen=True, eq=False)
class BandResult:
    """A simultaneous band evaluated on its exact breakpoint grid.

    Each breakpoint appears twice: first as the left limit (``is_left``),
    then as the value at the point.  Between consecutive grid rows the
    center is linear with slope -1 and the half-width is constant.
    """

    x: np.ndarray
    is_left: np.ndarray
    center: np.ndarray
    half_width: np.ndarray
    sf: np.ndarray
    reference: np.ndarray
    b_hat: float
    a: float
    beta: float
    sd: float
    m: int
    n: int

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.half_width

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.half_width

    def metadata(self) -> dict:
        return {
            "a": self.a,
            "beta": self.beta,
            "sd": self.sd,
            "sd_divisor": "n",
            "m": self.m,
            "n": self.n,
            "b_hat": self.b_hat,
        }


def simultaneous_band(
    sample: SortedSample, beta: float = 0.90, m: int | None = None, extra_points=()
) -> BandResult:
    """Simultaneous band for the mean residual life on ``[0, bhat]``.

    Parameters
    ----------
    sample : SortedSample
    beta : float
        Asymptotic simultaneous coverage.
    m : int, optional
        ``bhat`` is the ``(n - m)``-th order statistic; default ``floor(sqrt(n))``.
    extra_points : sequence of float
        Additional abscissae in ``[0, bhat]`` to include in the grid.
    """
    n = sample.n
    if n < 4:
        raise ValueError(f"need at least 4 observations for a band, got {n}")
    if m is None:
        m = default_m(n)
    b_hat = cutoff_bhat(sample, m)
    sd = sample.sd
    if sd == 0.0:
        raise ValueError("degenerate sample: all observations are equal")
    a = a_of_q(beta)

    extra = np.asarray(extra_points, dtype=float).ravel()
    if np.any((extra < 0) | (extra > b_hat)):
        raise ValueError(f"extra points must lie in [0, {b_hat}]")

    curve = mrl_curve(sample)
    breaks = curve.breakpoints[(curve.breakpoints > 0) & (curve.breakpoints <= b_hat)]
    right_x = np.unique(np.concatenate(([0.0], breaks, extra)))
    left_x = breaks
    x = np.concatenate((left_x, right_x))
    is_left = np.concatenate((np.ones(left_x.size, bool), np.zeros(right_x.size, bool)))
    order = np.lexsort((~is_left, x))
    x, is_left = x[order], is_left[order]

    vals = sample.values
    count = np.where(
        is_left,
        n - np.searchsorted(vals, x, side="left"),
        n - np.searchsorted(vals, x, side="right"),
    )
    sf = count / n
    center = np.where(is_left, curve.left_limit(x), mrl_at(sample, x))
    with np.errstate(divide="ignore"):
        # ties at bhat can leave no exceedances there; the width is then infinite
        half = a * sd / (math.sqrt(n) * sf)
    for arr in (x, is_left, center, half, sf):
        arr.setflags(write=False)
    return BandResult(
        x=x,
        is_left=is_left,
        center=center,
        half_width=half,
        sf=sf,
        reference=sample.mean - x,
        b_hat=b_hat,
        a=a,
        beta=float(beta),
        sd=sd,
        m=int(m),
        n=n,
    )


@dataclass(frozen=True)
class PointwiseInterval:
    x: float
    k: int
    n: int
    center: float
    sd: float
    se: float
    beta: float
    z: float
    lower: float
    upper: float
    small_k: bool


def pointwise_interval(sample: SortedSample, x: float, beta: float = 0.90) -> PointwiseInterval:
    """Normal-theory interval for the mean residual life at a single age.

    The standard error is ``S_n(x) / sqrt(n Fbar_n(x))`` with ``S_n(x)`` the
    divisor-``k`` standard deviation of the ``k`` exceedances.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    summ = exceedances(sample, x)
    if summ.k < 2:
        raise ValueError(f"need at least 2 exceedances beyond x={x}, found {summ.k}")
    center = float(mrl_at(sample, x))
    sd = math.sqrt(summ.variance)
    se = sd / math.sqrt(summ.k)
    z = normal_quantile(0.5 * (1.0 + beta))
    return PointwiseInterval(
        x=float(x),
        k=summ.k,
        n=sample.n,
        center=center,
        sd=sd,
        se=se,
        beta=float(beta),
        z=z,
        lower=center - z * se,
        upper=center + z * se,
        small_k=summ.k < SMALL_K,
    )


@dataclass(frozen=True)
class EllipseResult:
    """Asymptotic confidence ellipse for the pair ``(e(x), e(y))``.

    The region is ``d^T C^{-1} d <= radius2`` with ``C`` the estimated
    covariance of the two estimates.  ``axes`` holds the semi-axis lengths
    and ``directions`` the matching unit vectors (as columns).
    """

    x: float
    y: float
    center: tuple
    rho: float
    se: tuple
    beta: float
    radius2: float
    covariance: np.ndarray
    axes: tuple
    directions: np.ndarray
    clamped: bool

    def contains(self, point) -> bool:
        d = np.asarray(point, dtype=float) - np.asarray(self.center)
        if self.rho >= 1.0:
            # singular limit: the ellipse collapses onto a segment
            u = d / np.asarray(self.se)
            return bool(abs(u[0] - u[1]) < 1e-12 and u[0] ** 2 <= self.radius2)
        return bool(d @ np.linalg.solve(self.covariance, d) <= self.radius2)


def joint_ellipse(sample: SortedSample, x: float, y: float, beta: float = 0.90) -> EllipseResult:
    if not x < y:
        raise ValueError("joint_ellipse requires x < y")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    sx, sy = exceedances(sample, x), exceedances(sample, y)
    if sy.k < 2:
        raise ValueError(f"need at least 2 exceedances beyond y={y}, found {sy.k}")
    num = sy.k * sy.variance
    den = sx.k * sx.variance
    ratio = num / den if den > 0 else math.inf
    clamped = ratio > 1.0
    rho = 1.0 if clamped else math.sqrt(ratio)

    se = (math.sqrt(sx.variance / sx.k), math.sqrt(sy.variance / sy.k))
    cov = np.array([[se[0] ** 2, rho * se[0] * se[1]], [rho * se[0] * se[1], se[1] ** 2]])
    radius2 = -2.0 * math.log1p(-beta)  # chi-square(2) quantile
    evals, evecs = np.linalg.eigh(cov)
    axes = tuple(float(v) for v in np.sqrt(np.maximum(evals, 0.0) * radius2))
    return EllipseResult(
        x=float(x),
        y=float(y),
        center=(float(mrl_at(sample, x)), float(mrl_at(sample, y))),
        rho=rho,
        se=se,
        beta=float(beta),
        radius2=radius2,
        covariance=cov,
        axes=axes,
        directions=evecs,
        clamped=clamped,
    )
