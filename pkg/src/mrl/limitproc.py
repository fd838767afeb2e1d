"""Simulation of the Gaussian limit of ``sqrt(n) * (ehat_n - e)``.

The limit is built from a Brownian bridge ``U`` on ``[0, 1]``::

    Z(x) = ( -int_x^inf U(F(t)) dt + e(x) U(F(x)) ) / Fbar(x)

``Z' = Z * Fbar`` has independent increments in reversed time.  Writing
``Z''(s) = Z'(-log s)`` and ``tau2(s) = Var Z''(s)``, the process
``W(t) = Z''(g(sigma^2 t)) / sigma`` with ``g`` the inverse of ``tau2``
is standard Brownian motion on ``[0, 1]``.

Paths are stored row-wise: ``values`` has shape ``(n_paths, len(grid))``
(or ``(len(grid),)`` for a single path).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .models import AnalyticModel

log = logging.getLogger(__name__)

__all__ = [
    "BRIDGE_GRID",
    "TAIL_PROB",
    "ProcessPath",
    "VarianceClock",
    "build_Z",
    "simulate_bridge",
    "simulate_bridges",
    "simulate_Z",
    "to_s_domain",
    "transform_to_W",
    "variance_clock",
    "w_abscissae",
    "z_prime",
]

BRIDGE_GRID = 4096
QUAD_GRID = 4096
TAIL_PROB = 1e-4
CLOCK_S_MIN = 1e-6
W_GRID = 64

PARAMETRIZATIONS = ("x", "s", "t")


@dataclass(frozen=True, eq=False)
class ProcessPath:
    """One or many discretized sample paths on a common grid."""

    parametrization: str
    grid: np.ndarray
    values: np.ndarray
    model: AnalyticModel | None = None
    seed: int | None = None
    kind: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.parametrization not in PARAMETRIZATIONS:
            raise ValueError(f"unknown parametrization {self.parametrization!r}")
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be one-dimensional and strictly increasing")
        if values.shape[-1] != grid.size:
            raise ValueError("values do not match the grid")
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def n_paths(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[0]

    def at(self, points) -> np.ndarray:
        """Linear interpolation of every path at `points`."""
        points = np.asarray(points, dtype=float)
        vals = np.atleast_2d(self.values)
        pos = np.interp(points, self.grid, np.arange(self.grid.size))
        i = np.minimum(np.floor(pos).astype(int), self.grid.size - 2)
        w = pos - i
        out = vals[:, i] * (1.0 - w) + vals[:, i + 1] * w
        return out[0] if self.values.ndim == 1 else out


def _bridge_rows(rng: np.random.Generator, n_paths: int, grid_size: int) -> np.ndarray:
    dt = 1.0 / (grid_size - 1)
    w = np.zeros((n_paths, grid_size))
    np.cumsum(rng.standard_normal((n_paths, grid_size - 1)) * math.sqrt(dt), axis=1, out=w[:, 1:])
    t = np.linspace(0.0, 1.0, grid_size)
    return w - t * w[:, -1:]


def simulate_bridges(n_paths: int, grid_size: int = BRIDGE_GRID, seed=None) -> ProcessPath:
    """Standard Brownian bridges on a uniform grid of `grid_size` points."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, grid_size)
    return ProcessPath("t", t, _bridge_rows(rng, n_paths, grid_size), seed=seed, kind="bridge")


def simulate_bridge(grid_size: int = BRIDGE_GRID, seed=None) -> ProcessPath:
    b = simulate_bridges(1, grid_size, seed)
    return ProcessPath("t", b.grid, b.values[0], seed=seed, kind="bridge")


def _truncation_sd_bound(model: AnalyticModel, x_max: float) -> float:
    # SD of the true bridge integral beyond x_max is at most int sqrt(F Fbar) dt
    val, _ = integrate.quad(
        lambda t: math.sqrt(float(model.sf(t)) * float(model.cdf(t))), x_max, np.inf, limit=200
    )
    return val


def build_Z(bridge: ProcessPath, model: AnalyticModel, x_grid) -> ProcessPath:
    """Evaluate the limit process on `x_grid` from bridge path(s).

    The bridge is linearly interpolated in ``u = F(t)``.  The tail integral
    is a trapezoidal sum up to the ``1 - 1e-4`` quantile ``x_max``; beyond
    it the interpolated bridge is proportional to ``Fbar`` and is integrated
    in closed form.  ``x_grid`` must lie in ``[0, x_max]``.
    """
    if bridge.kind != "bridge" or bridge.parametrization != "t":
        raise ValueError("build_Z expects a Brownian bridge path")
    x_grid = np.asarray(x_grid, dtype=float)
    x_max = float(model.isf(TAIL_PROB))
    if np.any(x_grid < 0) or np.any(x_grid > x_max):
        raise ValueError(f"x_grid must lie in [0, {x_max:.6g}] (the 1 - {TAIL_PROB:g} quantile)")
    if np.any(np.diff(x_grid) <= 0):
        raise ValueError("x_grid must be strictly increasing")

    n_b = bridge.grid.size
    u_nodes = bridge.grid[bridge.grid < 1.0 - TAIL_PROB]
    nodes = np.unique(
        np.concatenate(
            (
                np.linspace(0.0, x_max, QUAD_GRID),
                np.asarray(model.ppf(u_nodes), dtype=float),
                x_grid,
            )
        )
    )
    nodes = nodes[(nodes >= 0) & (nodes <= x_max)]

    u_vals = np.atleast_2d(bridge.values)
    pos = np.asarray(model.cdf(nodes)) * (n_b - 1)
    i = np.minimum(np.floor(pos).astype(int), n_b - 2)
    w = pos - i
    uf = u_vals[:, i] * (1.0 - w) + u_vals[:, i + 1] * w

    seg = 0.5 * (uf[:, 1:] + uf[:, :-1]) * np.diff(nodes)
    tail = np.zeros_like(uf)
    tail[:, :-1] = np.cumsum(seg[:, ::-1], axis=1)[:, ::-1]
    # past x_max the interpolated bridge is linear in u and vanishes at u = 1,
    # i.e. proportional to Fbar, so its integral is U(F(x_max)) * e(x_max)
    tail += uf[:, -1:] * float(model.mrl(nodes[-1]))

    cols = np.searchsorted(nodes, x_grid)
    e = np.asarray(model.mrl(x_grid), dtype=float)
    sf = np.asarray(model.sf(x_grid), dtype=float)
    z = (-tail[:, cols] + e * uf[:, cols]) / sf

    bound = _truncation_sd_bound(model, x_max)
    log.info("closed-form tail beyond x=%.6g; tail-integral SD bound %.3g", x_max, bound)
    values = z[0] if bridge.values.ndim == 1 else z
    return ProcessPath(
        "x",
        x_grid,
        values,
        model=model,
        seed=bridge.seed,
        kind="Z",
        meta={"x_max": x_max, "truncation_sd_bound": bound},
    )


def simulate_Z(
    model: AnalyticModel,
    n_paths: int,
    x_grid,
    seed=None,
    grid_size: int = BRIDGE_GRID,
    chunk: int = 500,
) -> ProcessPath:
    """Many limit-process paths, generated chunk by chunk from bridges."""
    children = np.random.SeedSequence(seed).spawn(-(-n_paths // chunk))
    parts = []
    meta = {}
    for c, child in enumerate(children):
        rows = min(chunk, n_paths - c * chunk)
        bridge = ProcessPath(
            "t",
            np.linspace(0.0, 1.0, grid_size),
            _bridge_rows(np.random.default_rng(child), rows, grid_size),
            kind="bridge",
        )
        z = build_Z(bridge, model, x_grid)
        meta = z.meta
        parts.append(np.atleast_2d(z.values))
    return ProcessPath(
        "x", np.asarray(x_grid, float), np.vstack(parts), model=model, seed=seed, kind="Z", meta=meta
    )


def z_prime(z_path: ProcessPath) -> ProcessPath:
    """``Z' = Z * Fbar`` on the same x-grid."""
    if z_path.kind != "Z" or z_path.parametrization != "x":
        raise ValueError("z_prime expects a Z path in the x-domain")
    sf = np.asarray(z_path.model.sf(z_path.grid), dtype=float)
    return ProcessPath(
        "x", z_path.grid, z_path.values * sf, z_path.model, z_path.seed, "Z'", dict(z_path.meta)
    )


def to_s_domain(path: ProcessPath) -> ProcessPath:
    """Reparametrize an x-domain path by ``s = exp(-x)`` (grid reversed to increase)."""
    if path.parametrization != "x":
        raise ValueError("to_s_domain expects an x-domain path")
    s = np.exp(-path.grid[::-1])
    return ProcessPath(
        "s", s, path.values[..., ::-1], path.model, path.seed, path.kind, dict(path.meta)
    )


@dataclass(frozen=True, eq=False)
class VarianceClock:
    """``tau2(s) = Fbar(-log s) * sigma^2(-log s)`` tabulated on ``(0, 1]``."""

    model: AnalyticModel
    s_grid: np.ndarray
    tau2_values: np.ndarray

    @property
    def sigma2(self) -> float:
        return float(self.tau2_values[-1])

    def tau2(self, s):
        s = np.asarray(s, dtype=float)
        x = -np.log(s)
        out = np.asarray(self.model.sf(x)) * np.asarray(self.model.residual_variance(x))
        return out[()]

    def g(self, t):
        """Inverse of ``tau2`` by bisection in ``log s``, to 1e-10 relative in ``s``."""
        t = np.asarray(t, dtype=float)
        out = np.array([self._g_one(float(v)) for v in t.ravel()]).reshape(t.shape)
        return out[()]

    def _g_one(self, t: float) -> float:
        if t <= 0.0:
            return 0.0
        if t >= self.sigma2:
            return 1.0
        j = int(np.searchsorted(self.tau2_values, t))
        if j == 0:
            lo = math.log(self.s_grid[0])
            while float(self.tau2(math.exp(lo))) > t:
                lo *= 2.0
            hi = math.log(self.s_grid[0])
        else:
            lo, hi = math.log(self.s_grid[j - 1]), math.log(self.s_grid[j])
        while hi - lo > 1e-11:
            mid = 0.5 * (lo + hi)
            if float(self.tau2(math.exp(mid))) < t:
                lo = mid
            else:
                hi = mid
        return math.exp(0.5 * (lo + hi))


def variance_clock(model: AnalyticModel, grid_size: int = 256) -> VarianceClock:
    model.residual_variance(0.0)  # raises for infinite variance
    s = np.geomspace(CLOCK_S_MIN, 1.0, grid_size)
    s[-1] = 1.0
    clock = VarianceClock(model, s, np.zeros(0))
    tau2 = np.asarray(clock.tau2(s), dtype=float)
    if np.any(np.diff(tau2) <= 0):
        raise ValueError("tau^2 is not strictly increasing on the grid")
    return VarianceClock(model, s, tau2)


def w_abscissae(clock: VarianceClock, t_grid) -> np.ndarray:
    """x-values ``-log g(sigma^2 t)`` at which Z must be observed to form W(t)."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0) or np.any(t_grid > 1):
        raise ValueError("t_grid must lie in (0, 1]")
    return -np.log(np.asarray(clock.g(clock.sigma2 * t_grid), dtype=float))


def transform_to_W(z_path: ProcessPath, clock: VarianceClock, t_grid=None) -> ProcessPath:
    """Time-change a ``Z''`` path (s-domain) into Brownian motion on ``[0, 1]``.

    The returned grid starts at ``t = 0`` where ``W = 0``.
    """
    if z_path.parametrization != "s" or z_path.kind != "Z'":
        raise ValueError("transform_to_W expects a Z' path in the s-domain")
    if z_path.model != clock.model:
        raise ValueError("path and clock come from different models")
    if t_grid is None:
        t_grid = np.arange(1, W_GRID + 1) / W_GRID
    t_grid = np.asarray(t_grid, dtype=float)
    s_needed = np.asarray(clock.g(clock.sigma2 * t_grid), dtype=float)
    if np.any(s_needed < z_path.grid[0] * (1 - 1e-9)) or np.any(s_needed > z_path.grid[-1] * (1 + 1e-9)):
        raise ValueError("Z' path does not cover the s-values required by the t-grid")
    s_needed = np.clip(s_needed, z_path.grid[0], z_path.grid[-1])
    w = z_path.at(s_needed) / math.sqrt(clock.sigma2)
    w = np.atleast_2d(w)
    w = np.hstack((np.zeros((w.shape[0], 1)), w))
    values = w[0] if z_path.values.ndim == 1 else w
    return ProcessPath(
        "t", np.concatenate(([0.0], t_grid)), values, z_path.model, z_path.seed, "W"
    )
