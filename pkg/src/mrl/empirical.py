"""Empirical survival function and the empirical mean residual life.

Everything is computed from a sorted copy of the data with suffix sums, so
that each query costs one binary search.  Exceedance is strict throughout:
an observation ``X_j`` exceeds ``x`` iff ``X_j > x``.  This keeps the
empirical survival function right-continuous and makes ties harmless.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "DegenerateVarianceWarning",
    "ExceedanceSummary",
    "MrlCurve",
    "SortedSample",
    "cutoff_bhat",
    "default_m",
    "empirical_sf",
    "exceedances",
    "mrl_at",
    "mrl_curve",
    "residual_variance_at",
    "tail_integral",
]


class DegenerateVarianceWarning(UserWarning):
    """A variance was requested from a single exceedance."""


@dataclass(frozen=True, eq=False)
class SortedSample:
    """Nonnegative survival times sorted ascending.

    Parameters
    ----------
    values : array_like
        Raw observations.  They are copied, sorted and frozen.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).ravel()
        if arr.size == 0:
            raise ValueError("no data")
        if not np.all(np.isfinite(arr)):
            raise ValueError("observations must be finite")
        if np.any(arr < 0):
            raise ValueError("observations must be nonnegative")
        arr = np.sort(arr, kind="mergesort")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def max(self) -> float:
        return float(self.values[-1])

    @cached_property
    def suffix_sum(self) -> np.ndarray:
        # suffix_sum[i] = sum(values[i:]); trailing zero for the empty suffix
        s = np.zeros(self.n + 1)
        s[:-1] = np.cumsum(self.values[::-1])[::-1]
        s.setflags(write=False)
        return s

    @cached_property
    def suffix_sq_sum(self) -> np.ndarray:
        s = np.zeros(self.n + 1)
        s[:-1] = np.cumsum((self.values**2)[::-1])[::-1]
        s.setflags(write=False)
        return s

    @cached_property
    def _suffix_m2(self) -> np.ndarray:
        # Backward Welford pass: m2[i] = sum((values[i:] - mean(values[i:]))**2).
        # Avoids the cancellation in sum-of-squares minus squared sum.
        v = self.values.tolist()
        m2 = [0.0] * (self.n + 1)
        mean = 0.0
        acc = 0.0
        for count, i in enumerate(range(self.n - 1, -1, -1), start=1):
            delta = v[i] - mean
            mean += delta / count
            acc += delta * (v[i] - mean)
            m2[i] = acc
        out = np.asarray(m2)
        out.setflags(write=False)
        return out

    @property
    def mean(self) -> float:
        return float(self.suffix_sum[0] / self.n)

    @cached_property
    def sd(self) -> float:
        """Standard deviation of all observations, divisor ``n``."""
        return float(np.std(self.values))

    def index_above(self, x):
        """Index of the first observation strictly greater than `x`."""
        return np.searchsorted(self.values, x, side="right")

    def count_above(self, x):
        return self.n - self.index_above(x)

    def scaled(self, factor: float) -> "SortedSample":
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        return SortedSample(self.values * factor)


@dataclass(frozen=True)
class ExceedanceSummary:
    """Statistics of the observations strictly exceeding `x`."""

    x: float
    n: int
    k: int
    total: float
    total_sq: float
    m2: float = field(repr=False)

    @property
    def sf(self) -> float:
        return self.k / self.n

    @property
    def mean(self) -> float:
        if self.k == 0:
            raise ValueError("no exceedances")
        return self.total / self.k

    @property
    def variance(self) -> float:
        """Divisor-``k`` variance of the exceedances."""
        if self.k == 0:
            raise ValueError("no exceedances")
        return self.m2 / self.k

    @property
    def degenerate(self) -> bool:
        return self.k == 1


def exceedances(sample: SortedSample, x: float) -> ExceedanceSummary:
    i = int(sample.index_above(x))
    return ExceedanceSummary(
        x=float(x),
        n=sample.n,
        k=sample.n - i,
        total=float(sample.suffix_sum[i]),
        total_sq=float(sample.suffix_sq_sum[i]),
        m2=float(sample._suffix_m2[i]),
    )


def _scalar_or_array(out, x):
    return float(out) if np.ndim(x) == 0 else out


def empirical_sf(sample: SortedSample, x):
    """Fraction of observations strictly greater than `x`."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    return _scalar_or_array(sample.count_above(x) / sample.n, x)


def _check_nonnegative(x):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise ValueError("x must be finite and nonnegative")
    return x


def mrl_at(sample: SortedSample, x):
    """Empirical mean residual life: mean of the exceedances of `x`, less `x`.

    Zero at and beyond the sample maximum.  Vectorized over `x`.
    """
    x = _check_nonnegative(x)
    idx = sample.index_above(x)
    k = sample.n - idx
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(k > 0, sample.suffix_sum[idx] / np.maximum(k, 1) - x, 0.0)
    return _scalar_or_array(out, x)


def tail_integral(sample: SortedSample, x):
    """Integral of the empirical survival function over ``(x, inf)``.

    Equals ``(1/n) * sum over X_j > x of (X_j - x)``.  Evaluated as
    ``mrl_at(x) * k / n`` so the product identity holds to rounding.
    """
    x = _check_nonnegative(x)
    k = sample.count_above(x)
    out = np.asarray(mrl_at(sample, x)) * k / sample.n
    return _scalar_or_array(out, x)


def residual_variance_at(sample: SortedSample, x: float) -> float:
    """Divisor-``k`` variance of the observations exceeding `x`.

    Raises ``ValueError`` with no exceedances.  A single exceedance gives 0
    and a :class:`DegenerateVarianceWarning`.
    """
    if not (math.isfinite(x) and x >= 0):
        raise ValueError("x must be finite and nonnegative")
    summary = exceedances(sample, x)
    if summary.k == 0:
        raise ValueError("no exceedances")
    if summary.degenerate:
        warnings.warn(
            f"single exceedance beyond x={x}; variance is 0",
            DegenerateVarianceWarning,
            stacklevel=2,
        )
        return 0.0
    return summary.variance


def default_m(n: int) -> int:
    return math.isqrt(n)


def cutoff_bhat(sample: SortedSample, m: int | None = None) -> float:
    """The ``(n - m)``-th order statistic (1-based); ``m`` defaults to ``floor(sqrt(n))``."""
    n = sample.n
    if m is None:
        m = default_m(n)
    if not 1 <= m < n:
        raise ValueError(f"m must satisfy 1 <= m < n (got m={m}, n={n})")
    return float(sample.values[n - m - 1])


@dataclass(frozen=True, eq=False)
class MrlCurve:
    """Exact piecewise-linear form of the empirical mean residual life.

    On ``[starts[j], breakpoints[j])`` the curve is ``intercepts[j] - x``
    (slope -1), where ``starts = (0, b_0, ..., b_{d-2})``.  It is zero from
    the last breakpoint (the sample maximum) onwards.
    """

    breakpoints: np.ndarray
    intercepts: np.ndarray
    counts: np.ndarray

    @property
    def support_end(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def starts(self) -> np.ndarray:
        return np.concatenate(([0.0], self.breakpoints[:-1]))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        j = np.searchsorted(self.breakpoints, x, side="right")
        return _scalar_or_array(self._eval(j, x), x)

    def left_limit(self, x):
        """Value of the curve approached from the left of `x`."""
        x = np.asarray(x, dtype=float)
        j = np.searchsorted(self.breakpoints, x, side="left")
        return _scalar_or_array(self._eval(j, x), x)

    def _eval(self, j, x):
        d = self.breakpoints.size
        inside = j < d
        return np.where(inside, self.intercepts[np.minimum(j, d - 1)] - x, 0.0)

    @property
    def jumps(self) -> np.ndarray:
        """Right value minus left limit at each breakpoint."""
        b = self.breakpoints
        return np.asarray(self(b)) - np.asarray(self.left_limit(b))


def mrl_curve(sample: SortedSample) -> MrlCurve:
    breaks = np.unique(sample.values)
    # interval j has exceedance set {X > breaks[j-1]}, i.e. all data for j = 0
    first = np.concatenate(([0], np.searchsorted(sample.values, breaks[:-1], side="right")))
    counts = sample.n - first
    intercepts = sample.suffix_sum[first] / counts
    for arr in (breaks, intercepts, counts):
        arr.setflags(write=False)
    return MrlCurve(breakpoints=breaks, intercepts=intercepts, counts=counts)
