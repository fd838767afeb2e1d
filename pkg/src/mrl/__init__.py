"""Mean residual life: estimation, confidence bands and limit-process simulation."""

__version__ = "0.1.0"

from .bands import (  # noqa: E402
    a_of_q,
    joint_ellipse,
    pointwise_interval,
    q_of_a,
    simultaneous_band,
)
from .empirical import (  # noqa: E402
    SortedSample,
    cutoff_bhat,
    empirical_sf,
    mrl_at,
    mrl_curve,
    residual_variance_at,
    tail_integral,
)
from .models import Exponential, GammaMrl, Pareto, Weibull, parse_model  # noqa: E402

__all__ = [
    "Exponential",
    "GammaMrl",
    "Pareto",
    "SortedSample",
    "Weibull",
    "a_of_q",
    "cutoff_bhat",
    "empirical_sf",
    "joint_ellipse",
    "mrl_at",
    "mrl_curve",
    "parse_model",
    "pointwise_interval",
    "q_of_a",
    "residual_variance_at",
    "simultaneous_band",
    "tail_integral",
]
