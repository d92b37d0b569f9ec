"""Ball volumes, exponential volume growth and the comparison ODE."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import IntegratorOverflowError, QuadratureRangeError
from .geometry import ModelMetric

DEFAULT_DU = 2.5e-4
DEFAULT_U_MAX = 60.0


@lru_cache(maxsize=32)
def _radial_table(n: int, cx1: float, du: float, u_max: float):
    # cumulative trapezoid of e^{n u} (1 + c x1 e^{-u})^n on a uniform u-grid
    m = int(math.ceil(u_max / du))
    u = np.arange(m + 1) * du
    f = np.exp(n * u) * (1 + cx1 * np.exp(-u)) ** n
    cum = np.concatenate(([0.0], np.cumsum(0.5 * du * (f[1:] + f[:-1]))))
    return u, f, cum


def _torus_nodes(metric: ModelMetric, ny: int | None):
    n = metric.n
    if metric.profile.is_constant:
        return np.zeros((1, n)), np.array([metric.torus_volume])
    if ny is None:
        ny = max(16, int(2 ** (16 / n)))
    t = np.arange(ny) * (2 * np.pi / ny)
    mesh = np.stack(np.meshgrid(*([t] * n), indexing="ij"), axis=-1).reshape(-1, n)
    return mesh, np.full(len(mesh), (2 * np.pi / ny) ** n)


def ball_volume(metric: ModelMetric, R: float, du: float = DEFAULT_DU,
                u_max: float = DEFAULT_U_MAX, ny: int | None = None) -> float:
    """Volume of ``K`` plus the collar slab within radial distance ``R``.

    The collar part is ``int_T int_0^{alpha(y) R} x1^-n e^{n u} (1 + c x)^n / alpha du dy``
    (the density in ``u = log(x1/x)``), integrated by the trapezoid rule on
    a fixed ``u``-grid of spacing ``du``; the last partial cell is closed
    with its own trapezoid so the scheme stays second order.
    """
    if R < 0:
        raise ValueError("R must be non-negative")
    if metric.profile.alpha1 * R > u_max:
        raise QuadratureRangeError(
            f"R={R} needs u up to {metric.profile.alpha1 * R:.3g} > configured u_max={u_max}")
    n = metric.n
    ug, fg, cum = _radial_table(n, metric.c * metric.x1, du, u_max)
    y, w = _torus_nodes(metric, ny)
    alpha = metric.profile.alpha(y)
    top = alpha * R
    k = np.minimum((top / du).astype(int), len(ug) - 1)
    ftop = np.exp(n * top) * (1 + metric.c * metric.x1 * np.exp(-top)) ** n
    inner = cum[k] + 0.5 * (top - ug[k]) * (fg[k] + ftop)
    return float(metric.compact_volume + metric.x1 ** (-n) * np.sum(w * inner / alpha))


@dataclass
class GrowthFit:
    kappa_hat: float
    radii: np.ndarray
    log_volumes: np.ndarray
    fit_radii: np.ndarray
    intercept: float
    residual_rms: float


def fit_volume_growth(metric: ModelMetric, radii, **quad) -> GrowthFit:
    """Least-squares slope of ``log Vol(B(R))`` over the largest half of ``radii``."""
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) < 3:
        raise ValueError("need at least 3 radii")
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly increasing")
    logv = np.log([ball_volume(metric, R, **quad) for R in radii])
    half = len(radii) - len(radii) // 2
    rr, lv = radii[-half:], logv[-half:]
    slope, icpt = np.polyfit(rr, lv, 1)
    rms = float(np.sqrt(np.mean((lv - (slope * rr + icpt)) ** 2)))
    return GrowthFit(float(slope), radii, logv, rr, float(icpt), rms)


def volume_growth_rate(metric: ModelMetric, radii, **quad) -> float:
    return fit_volume_growth(metric, radii, **quad).kappa_hat


@dataclass
class ComparisonSolution:
    """Solution of ``u'' + q u = 0`` stored in log form.

    ``log_u[i]`` and ``log_du[i]`` are ``log u(r_i)``, ``log u'(r_i)``;
    ``log_volume[i]`` is ``log int_0^{r_i} u**n``.
    """

    r: np.ndarray
    log_u: np.ndarray
    log_du: np.ndarray
    log_volume: np.ndarray
    n: int

    @property
    def u(self) -> np.ndarray:
        return np.exp(self.log_u)

    @property
    def du(self) -> np.ndarray:
        return np.exp(self.log_du)

    @property
    def log_vol_bound(self) -> float:
        return float(self.log_volume[-1])

    @property
    def vol_bound(self) -> float:
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_volume[-1]))

    def growth_slope(self) -> float:
        """Slope of ``log_volume`` against ``r`` over the far half of the grid."""
        m = len(self.r) // 2
        return float(np.polyfit(self.r[m:], self.log_volume[m:], 1)[0])


def sturm_liouville_compare(s: float, t: float, alpha1eps: float, gamma: float, R: float,
                            n: int, step: float = 1e-3) -> ComparisonSolution:
    """Integrate ``u'' + q u = 0, u(0)=0, u'(0)=1`` with piecewise-constant ``q``.

    ``q = -alpha1eps**2`` on ``[0, s)`` and ``[t, R]``, ``q = -gamma**2`` on
    ``[s, t)``. Classical RK4 with steps aligned to ``s`` and ``t``; the
    state is renormalized whenever it grows past 1e100 and the scale is
    carried in log form.
    """
    if not 0 <= s <= t <= R:
        raise ValueError("need 0 <= s <= t <= R")
    if not gamma >= alpha1eps > 0:
        raise ValueError("need gamma >= alpha1eps > 0")
    pieces = [(0.0, s, alpha1eps), (s, t, gamma), (t, R, alpha1eps)]
    rs = [0.0]
    states = [(0.0, 1.0)]
    logscale = [0.0]
    state = states[0]
    scale = 0.0
    for a, b, k in pieces:
        if b <= a:
            continue
        m = int(math.ceil((b - a) / step))
        h = (b - a) / m
        q = -k * k
        for i in range(1, m + 1):
            u, v = state
            k1u, k1v = v, -q * u
            k2u, k2v = v + 0.5 * h * k1v, -q * (u + 0.5 * h * k1u)
            k3u, k3v = v + 0.5 * h * k2v, -q * (u + 0.5 * h * k2u)
            k4u, k4v = v + h * k3v, -q * (u + h * k3u)
            u = u + (h / 6) * (k1u + 2 * k2u + 2 * k3u + k4u)
            v = v + (h / 6) * (k1v + 2 * k2v + 2 * k3v + k4v)
            big = max(abs(u), abs(v))
            if not math.isfinite(big):
                raise IntegratorOverflowError("comparison ODE left the floating range; reduce step")
            if big > 1e100:
                u, v = u / big, v / big
                scale += math.log(big)
            state = (u, v)
            rs.append(a + i * h)
            states.append(state)
            logscale.append(scale)
    r = np.array(rs)
    st = np.array(states)
    ls = np.array(logscale)
    with np.errstate(divide="ignore"):
        log_u = np.log(st[:, 0]) + ls
        log_du = np.log(st[:, 1]) + ls
    # trapezoid of u^n accumulated in log form
    f = n * log_u
    dr = np.diff(r)
    cell = np.logaddexp(f[1:], f[:-1]) + np.log(0.5 * dr)
    log_vol = np.concatenate(([-np.inf], np.logaddexp.accumulate(cell)))
    return ComparisonSolution(r, log_u, log_du, log_vol, n)

