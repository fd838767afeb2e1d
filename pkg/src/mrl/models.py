"""Analytic lifetime distributions used as ground truth.

Four families are built in, each parameterized exactly as in the classical
examples:

* ``Exponential(theta)``: ``sf(x) = exp(-x / theta)``
* ``Weibull(theta)``: ``sf(x) = exp(-x ** theta)`` (unit scale)
* ``Pareto(c)``: ``sf(x) = (1 + c x) ** (-1 / c)``
* ``GammaMrl(alpha)``: gamma with shape 2 and rate ``alpha``, whose mean
  residual life is ``(alpha x + 2) / (alpha (alpha x + 1))``

Where no closed form is used, conditional moments are computed by adaptive
quadrature of the excess ``u = X - x`` on ``[0, inf)``, with the integrand
written as a ratio of survival terms in log space so that far tails do not
underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy import integrate, special

from .empirical import SortedSample

__all__ = [
    "AnalyticModel",
    "ConditionReport",
    "Exponential",
    "GammaMrl",
    "Pareto",
    "Weibull",
    "condition_diagnostics",
    "limit_correlation",
    "mrl",
    "parse_model",
    "residual_variance",
    "sample",
    "var_limit_process",
]

# Diagnostics schedule: probes are multiples of the mean; eta is
# differentiated with a relative step.
PROBE_MULTIPLES = (10.0, 1e2, 1e3, 1e4)
DIFF_STEP = 1e-5
MOMENT_ORDERS = tuple(round(1.0 + 0.05 * i, 2) for i in range(381))  # 1.00 .. 20.00

_QUAD_EPSREL = 1e-12
_WEIBULL_Z_MAX = 500.0


class InfiniteMomentError(ValueError):
    pass


def _vectorize(fn, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return fn(float(x))
    return np.array([fn(float(v)) for v in x.ravel()]).reshape(x.shape)


@dataclass(frozen=True)
class AnalyticModel:
    """Base class.  Subclasses provide ``logsf``, ``logpdf`` and ``isf``."""

    name: ClassVar[str] = ""

    # -- distribution primitives -------------------------------------------
    def logsf(self, x):
        raise NotImplementedError

    def logpdf(self, x):
        raise NotImplementedError

    def isf(self, p):
        """Inverse survival function: the ``x`` with ``sf(x) = p``."""
        raise NotImplementedError

    def sf(self, x):
        return np.exp(self.logsf(x))

    def cdf(self, x):
        return -np.expm1(self.logsf(x))

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def ppf(self, q):
        return self.isf(1.0 - np.asarray(q, dtype=float))

    def hazard(self, x):
        return 1.0 / self.eta(x)

    def eta(self, x):
        """Reciprocal hazard ``sf / pdf``."""
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(np.asarray(self.logsf(x)) - np.asarray(self.logpdf(x)))

    # -- moments -------------------------------------------------------------
    @property
    def mean(self) -> float:
        return float(self.mrl(0.0))

    @property
    def variance(self) -> float:
        return float(self.residual_variance(0.0))

    def has_moment(self, r: float) -> bool:
        return True

    @property
    def tail_constant(self) -> float:
        """Limit of the derivative of ``eta`` at infinity."""
        return 0.0

    def _check_mean(self):
        pass

    def _check_variance(self):
        self._check_mean()

    def _scale(self, x: float) -> float:
        s = float(self.eta(x))
        if not (math.isfinite(s) and s > 0):
            s = float(self.isf(0.5))
        return s

    def _excess_integral(self, x: float, integrand) -> float:
        s = self._scale(x)
        val, _ = integrate.quad(
            lambda v: integrand(s * v), 0.0, np.inf, epsabs=0.0, epsrel=_QUAD_EPSREL, limit=500
        )
        return s * val

    def _log_excess_sf(self, x: float, u: float) -> float:
        """``log(sf(x + u) / sf(x))``."""
        return float(self.logsf(x + u)) - float(self.logsf(x))

    def _log_excess_pdf(self, x: float, u: float) -> float:
        """``log(pdf(x + u) / sf(x))``."""
        return float(self.logpdf(x + u)) - float(self.logsf(x))

    def _mrl_quad(self, x: float) -> float:
        return self._excess_integral(x, lambda u: math.exp(self._log_excess_sf(x, u)))

    def _second_moment_quad(self, x: float) -> float:
        # E[(X - x)^2 | X > x], written against dF
        return self._excess_integral(
            x, lambda u: u * u * math.exp(self._log_excess_pdf(x, u)) if u > 0 else 0.0
        )

    def mrl(self, x):
        self._check_mean()
        return _vectorize(self._mrl_quad, x)

    def residual_variance(self, x):
        self._check_variance()

        def one(t):
            e = self._mrl_quad(t)
            return self._second_moment_quad(t) - e * e

        return _vectorize(one, x)

    # -- sampling --------------------------------------------------------------
    def sample(self, n: int, seed=None) -> SortedSample:
        if n < 1:
            raise ValueError("n must be at least 1")
        rng = np.random.default_rng(seed)
        # 1 - U lies in (0, 1], so isf never sees 0
        return SortedSample(self.isf(1.0 - rng.random(n)))

    @property
    def spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(AnalyticModel):
    theta: float = 1.0
    name: ClassVar[str] = "exp"

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("Exponential requires theta > 0")

    def logsf(self, x):
        return -np.asarray(x, dtype=float) / self.theta

    def logpdf(self, x):
        return -np.asarray(x, dtype=float) / self.theta - math.log(self.theta)

    def isf(self, p):
        return -self.theta * np.log(p)

    def eta(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.theta)

    def mrl(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.theta)[()]

    def residual_variance(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.theta**2)[()]

    @property
    def spec(self) -> str:
        return f"exp:{self.theta!r}"


@dataclass(frozen=True)
class Weibull(AnalyticModel):
    theta: float = 1.0
    name: ClassVar[str] = "weibull"

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("Weibull requires theta > 0")

    def logsf(self, x):
        return -np.power(np.asarray(x, dtype=float), self.theta)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = math.log(self.theta) + (self.theta - 1.0) * np.log(x) - np.power(x, self.theta)
        if self.theta == 1.0:
            out = np.where(x == 0, 0.0, out)
        return out

    def isf(self, p):
        return np.power(-np.log(p), 1.0 / self.theta)

    def _growth(self, x: float, u: float) -> float:
        # (x + u)^theta - x^theta without cancellation
        if x == 0.0:
            return u**self.theta
        return x**self.theta * math.expm1(self.theta * math.log1p(u / x))

    def _log_excess_sf(self, x: float, u: float) -> float:
        return -self._growth(x, u)

    def _log_excess_pdf(self, x: float, u: float) -> float:
        return math.log(self.theta) + (self.theta - 1.0) * math.log(x + u) - self._growth(x, u)

    def eta(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.power(x, 1.0 - self.theta) / self.theta

    def mrl(self, x):
        # Gamma(1/theta, x^theta) / theta / Fbar(x); quadrature where exp(x^theta) overflows
        x = np.asarray(x, dtype=float)
        a = 1.0 / self.theta
        z = np.power(x, self.theta)
        far = z > _WEIBULL_Z_MAX
        with np.errstate(over="ignore"):
            out = special.gamma(a) * special.gammaincc(a, z) * np.exp(np.where(far, 0.0, z)) * a
        if np.any(far):
            out = np.array(out, dtype=float).ravel()
            out[far.ravel()] = _vectorize(self._mrl_quad, x.ravel()[far.ravel()])
            out = out.reshape(x.shape)
        return out[()]

    @property
    def mean(self) -> float:
        return math.gamma(1.0 + 1.0 / self.theta)

    @property
    def spec(self) -> str:
        return f"weibull:{self.theta!r}"


@dataclass(frozen=True)
class Pareto(AnalyticModel):
    c: float = 0.25
    name: ClassVar[str] = "pareto"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("Pareto requires c > 0")

    def logsf(self, x):
        return -np.log1p(self.c * np.asarray(x, dtype=float)) / self.c

    def logpdf(self, x):
        return -(1.0 / self.c + 1.0) * np.log1p(self.c * np.asarray(x, dtype=float))

    def isf(self, p):
        return np.expm1(-self.c * np.log(p)) / self.c

    def eta(self, x):
        return 1.0 + self.c * np.asarray(x, dtype=float)

    def has_moment(self, r: float) -> bool:
        return r < 1.0 / self.c

    @property
    def tail_constant(self) -> float:
        return self.c

    def _check_mean(self):
        if self.c >= 1.0:
            raise InfiniteMomentError(f"infinite mean: Pareto with c={self.c} >= 1")

    def _check_variance(self):
        if self.c >= 0.5:
            raise InfiniteMomentError(f"infinite variance: Pareto with c={self.c} >= 1/2")

    def mrl(self, x):
        self._check_mean()
        return ((1.0 + self.c * np.asarray(x, dtype=float)) / (1.0 - self.c))[()]

    @property
    def spec(self) -> str:
        return f"pareto:{self.c!r}"


@dataclass(frozen=True)
class GammaMrl(AnalyticModel):
    """Gamma law with shape 2 and rate `alpha`."""

    alpha: float = 1.0
    name: ClassVar[str] = "gammamrl"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("GammaMrl requires alpha > 0")

    def logsf(self, x):
        y = self.alpha * np.asarray(x, dtype=float)
        return np.log1p(y) - y

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return 2.0 * math.log(self.alpha) + np.log(x) - self.alpha * x

    def isf(self, p):
        # (1 + y) exp(-(1 + y)) = p / e  on the branch 1 + y >= 1
        p = np.asarray(p, dtype=float)
        arg = np.maximum(-p / math.e, np.nextafter(-1.0 / math.e, 0.0))
        y = -special.lambertw(arg, k=-1).real - 1.0
        logp = np.log(p)
        # near the branch point log1p(y) - y ~ -y^2/2; polish with Newton
        y = np.where(y < 1e-2, np.sqrt(np.maximum(-2.0 * logp, 0.0)), y)
        with np.errstate(divide="ignore", invalid="ignore"):
            for _ in range(4):
                step = (np.log1p(y) - y - logp) * (1.0 + y) / y
                y = np.where(y > 0, y + step, y)
        return np.where(p >= 1.0, 0.0, np.maximum(y, 0.0)) / self.alpha

    def eta(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return (1.0 + self.alpha * x) / (self.alpha**2 * x)

    def mrl(self, x):
        y = self.alpha * np.asarray(x, dtype=float)
        return ((y + 2.0) / (self.alpha * (y + 1.0)))[()]

    @property
    def spec(self) -> str:
        return f"gammamrl:{self.alpha!r}"


_FAMILIES = {cls.name: cls for cls in (Exponential, Weibull, Pareto, GammaMrl)}


def parse_model(text: str) -> AnalyticModel:
    """Parse ``name:param`` (``exp:2``, ``weibull:1.5``, ``pareto:0.25``, ``gammamrl:0.001``)."""
    name, _, params = text.strip().partition(":")
    cls = _FAMILIES.get(name.strip().lower())
    if cls is None:
        raise ValueError(f"unknown model {name!r}; expected one of {sorted(_FAMILIES)}")
    if not params:
        return cls()
    try:
        values = [float(p) for p in params.split(",")]
    except ValueError:
        raise ValueError(f"bad model parameters in {text!r}") from None
    if len(values) != 1:
        raise ValueError(f"{name} takes exactly one parameter")
    return cls(values[0])


# -- functional interface ------------------------------------------------------


def mrl(model: AnalyticModel, x):
    return model.mrl(x)


def residual_variance(model: AnalyticModel, x):
    return model.residual_variance(x)


def var_limit_process(model: AnalyticModel, x):
    """Variance of the limiting process at `x`: ``sigma^2(x) / sf(x)``."""
    return np.asarray(model.residual_variance(x)) * np.exp(-np.asarray(model.logsf(x)))[()]


def limit_correlation(model: AnalyticModel, x: float, y: float) -> float:
    """Asymptotic correlation of the estimator at ``x <= y``."""
    if x > y:
        x, y = y, x
    num = float(model.sf(y)) * float(model.residual_variance(y))
    den = float(model.sf(x)) * float(model.residual_variance(x))
    return math.sqrt(num / den)


def sample(model: AnalyticModel, n: int, seed=None) -> SortedSample:
    return model.sample(n, seed)


@dataclass(frozen=True)
class ConditionReport:
    model: str
    probes: tuple
    eta_slopes: tuple
    c_estimate: float
    moment_order: float
    condition3: bool
    condition4a: bool
    condition4b: bool
    cv2_ratios: tuple
    cv2_limit: float = field(default=float("nan"))


def condition_diagnostics(model: AnalyticModel, probe_points=None) -> ConditionReport:
    """Numerical tail diagnostics at increasing probe points.

    The derivative of ``eta = sf / pdf`` is estimated by central differences
    with step ``x * 1e-5``; its value at the last probe is reported as the
    tail constant estimate.  These are diagnostics, not proofs.
    """
    if probe_points is None:
        mu = model.mean if model.has_moment(1.0) else 1.0
        probe_points = [m * mu for m in PROBE_MULTIPLES]
    probes = np.asarray(probe_points, dtype=float)
    if np.any(probes <= 0) or np.any(np.diff(probes) <= 0):
        raise ValueError("probe points must be positive and increasing")

    h = probes * DIFF_STEP
    slopes = (np.asarray(model.eta(probes + h)) - np.asarray(model.eta(probes - h))) / (2 * h)
    c_est = float(slopes[-1])

    finite = [r for r in MOMENT_ORDERS if model.has_moment(r)]
    r = max(finite) if finite else 0.0
    cond3 = r > 2.0

    settled = len(slopes) < 2 or abs(slopes[-1] - slopes[-2]) < 1e-3 * max(1.0, abs(c_est))
    tol = 1e-6
    cond4a = bool(cond3 and settled and -tol <= c_est <= 1.0 / r + tol)

    cond4b = False
    if cond3:
        gamma = 0.5 * (1.0 / r + 0.5)
        log_ratio = np.log(np.asarray(model.eta(probes))) + gamma * np.asarray(model.logsf(probes))
        cond4b = bool(len(log_ratio) < 2 or log_ratio[-1] <= log_ratio[-2] + 1e-9)

    if model.has_moment(2.0) and not (isinstance(model, Pareto) and model.c >= 0.5):
        e = np.asarray(model.mrl(probes), dtype=float)
        ratios = tuple(float(v) for v in np.asarray(model.residual_variance(probes)) / e**2)
    else:
        ratios = ()
    limit = 1.0 / (1.0 - 2.0 * c_est) if c_est < 0.5 else float("inf")
    return ConditionReport(
        model=model.spec,
        probes=tuple(float(p) for p in probes),
        eta_slopes=tuple(float(s) for s in slopes),
        c_estimate=c_est,
        moment_order=float(r),
        condition3=bool(cond3),
        condition4a=cond4a,
        condition4b=cond4b,
        cv2_ratios=ratios,
        cv2_limit=limit,
    )
