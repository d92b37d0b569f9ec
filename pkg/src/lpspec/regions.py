"""Closed-form spectral and resolvent regions in the complex plane.

All regions here are of the form ``{x + iy : x >= y**2 / width + vertex}``
(a closed parabolic region opening to the right), unions of such regions
over a curvature parameter ``A``, or the degenerate real rays they collapse
to at ``p = 2``.

Points of the complex plane are plain Python ``complex`` numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateRegionError, NotInRegionError

BOUNDARY_RTOL = 1e-12

Interval = tuple[float, float]


def _normalize_intervals(intervals: Iterable[Sequence[float] | float]) -> tuple[Interval, ...]:
    out = []
    for item in intervals:
        if np.ndim(item) == 0:
            lo = hi = float(item)  # type: ignore[arg-type]
        else:
            lo, hi = (float(v) for v in item)  # type: ignore[union-attr]
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
            raise ValueError(f"bad interval ({lo}, {hi})")
        out.append((lo, hi))
    if not out:
        raise ValueError("alpha_sq_intervals must not be empty")
    out.sort()
    merged = [out[0]]
    for lo, hi in out[1:]:
        plo, phi = merged[-1]
        if lo <= phi:
            merged[-1] = (plo, max(phi, hi))
        else:
            merged.append((lo, hi))
    return tuple(merged)


@dataclass(frozen=True)
class SpectralParams:
    """Inputs shared by every region formula.

    Parameters
    ----------
    n : int
        Boundary dimension (the manifold has dimension ``n + 1``).
    alpha0, alpha1 : float
        Minimum and maximum of ``|d rho|`` on the boundary.
    alpha_sq_intervals : tuple of (lo, hi)
        The image of ``alpha**2`` as a finite union of closed intervals; a
        single value is a zero-length interval. Defaults to
        ``[(alpha0**2, alpha1**2)]``.
    p : float
        Default exponent in ``[1, 2]``.
    """

    n: int
    alpha0: float
    alpha1: float
    alpha_sq_intervals: tuple[Interval, ...] = ()
    p: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not (0 < self.alpha0 <= self.alpha1):
            raise ValueError("need 0 < alpha0 <= alpha1")
        if not (1.0 <= self.p <= 2.0):
            raise ValueError(f"p must lie in [1,2]; use conjugate_exponent for p>2 (got {self.p})")
        ivs = self.alpha_sq_intervals or ((self.alpha0**2, self.alpha1**2),)
        ivs = _normalize_intervals(ivs)
        tol = 1e-12 * self.alpha1**2
        if abs(ivs[0][0] - self.alpha0**2) > tol or abs(ivs[-1][1] - self.alpha1**2) > tol:
            raise ValueError("alpha_sq_intervals must span exactly [alpha0**2, alpha1**2]")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "alpha_sq_intervals", ivs)

    @property
    def structure(self) -> str:
        """Which of the four admissible shapes the curvature image has."""
        points = all(lo == hi for lo, hi in self.alpha_sq_intervals)
        if len(self.alpha_sq_intervals) == 1:
            return "single" if points else "interval"
        return "finite" if points else "union"

    def a_samples(self, per_interval: int = 5) -> list[float]:
        """Representative values of ``A`` from every interval (endpoints included)."""
        out: list[float] = []
        for lo, hi in self.alpha_sq_intervals:
            if lo == hi:
                out.append(lo)
            else:
                out.extend(np.linspace(lo, hi, max(per_interval, 2)).tolist())
        return out


@dataclass(frozen=True)
class Parabola:
    """The closed region ``x >= y**2 / width + vertex``.

    With ``degenerate=True`` the region is the real ray ``[vertex, inf)``.
    """

    width: float
    vertex: float
    degenerate: bool = False

    def __post_init__(self):
        if not self.degenerate and not self.width > 0:
            raise ValueError("parabola width must be positive")

    def boundary_x(self, y):
        y = np.asarray(y, dtype=float)
        if self.degenerate:
            return np.where(y == 0, self.vertex, np.inf)
        return y**2 / self.width + self.vertex

    def contains(self, z, rtol: float = BOUNDARY_RTOL):
        """Closed-region test; accepts a scalar or an array of points."""
        z = np.asarray(z, dtype=complex)
        x, y = z.real, z.imag
        if self.degenerate:
            out = (y == 0) & (x >= self.vertex - rtol * (1 + np.abs(x)))
        else:
            out = x >= y * y / self.width + self.vertex - rtol * (1 + np.abs(x))
        return bool(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RegionUnion:
    """Union over ``A`` in the curvature image of the slice parabolas."""

    params: SpectralParams
    p: float
    _coef: tuple[float, float] = field(init=False, repr=False)

    def __post_init__(self):
        n, p = self.params.n, self.p
        # slice(A) has width A*c and vertex A*d
        object.__setattr__(self, "_coef", (n * n * (1 - 2 / p) ** 2, n * n / p * (1 - 1 / p)))

    @property
    def degenerate(self) -> bool:
        return self.p == 2.0

    def slice(self, A: float) -> Parabola:
        c, d = self._coef
        if self.degenerate:
            return Parabola(0.0, A * d, degenerate=True)
        return Parabola(A * c, A * d)

    def slices(self, per_interval: int = 5) -> list[tuple[float, Parabola]]:
        return [(A, self.slice(A)) for A in self.params.a_samples(per_interval)]

    def critical_a(self, y: float) -> float:
        """Minimizer of ``A -> F(A, y)`` over ``A > 0`` (``inf`` at p = 1)."""
        c, d = self._coef
        if d == 0.0:
            return math.inf
        return abs(y) / math.sqrt(c * d)

    def min_boundary(self, y):
        """``min over A in alpha_sq of F(A, y)``: the boundary of the union.

        ``F(., y)`` is convex on ``A > 0`` so its minimum over each interval
        sits at the critical point clamped into that interval.
        """
        if self.degenerate:
            raise DegenerateRegionError("p = 2: the union is a real ray, use ray_membership")
        c, d = self._coef
        y = np.asarray(y, dtype=float)
        y2 = y * y
        if d == 0.0:
            a_star = np.full_like(y, np.inf)
        else:
            a_star = np.abs(y) / math.sqrt(c * d)
        best = np.full_like(y, np.inf)
        for lo, hi in self.params.alpha_sq_intervals:
            a = np.clip(a_star, lo, hi)
            best = np.minimum(best, y2 / (a * c) + a * d)
        return best


def l1_contained_parabola(params: SpectralParams) -> Parabola:
    n, a1 = params.n, params.alpha1
    return Parabola(n * n * a1 * a1, 0.0)


def l1_containing_parabola(params: SpectralParams) -> Parabola:
    n, a0, a1 = params.n, params.alpha0, params.alpha1
    return Parabola(n * n * a1 * a1, -n * n * (a1 * a1 - a0 * a0) / 4)


def _check_p(p: float) -> float:
    p = float(p)
    if not p >= 1.0 or math.isinf(p):
        raise ValueError(f"exponent must be finite and >= 1, got {p}")
    return p


def lp_contained_region(params: SpectralParams, p: float | None = None) -> RegionUnion:
    """Union over ``A`` of ``x >= y**2/(A n**2 (1-2/p)**2) + A (n**2/p)(1-1/p)``.

    The formulas are invariant under ``p -> p/(p-1)``, so finite ``p > 2``
    is accepted and gives the same region as its conjugate.
    """
    return RegionUnion(params, _check_p(params.p if p is None else p))


def lp_containing_parabola(params: SpectralParams, p: float | None = None) -> Parabola:
    p = _check_p(params.p if p is None else p)
    n, a0, a1 = params.n, params.alpha0, params.alpha1
    k2 = (2 / p - 1) ** 2
    if k2 == 0.0:
        return Parabola(0.0, n * n * a0 * a0 / 4, degenerate=True)
    return Parabola(n * n * a1 * a1 * k2, n * n * a0 * a0 / 4 - n * n * a1 * a1 * k2 / 4)


def membership(point, region: RegionUnion, rtol: float = BOUNDARY_RTOL):
    """Is ``point`` in the union of slice parabolas? Closed regions: ties count.

    ``point`` may be an array, in which case a boolean array is returned.
    """
    if region.degenerate:
        raise DegenerateRegionError("p = 2: membership reduces to ray tests, use ray_membership")
    z = np.asarray(point, dtype=complex)
    x = z.real
    out = x >= region.min_boundary(z.imag) - rtol * (1 + np.abs(x))
    return bool(out) if out.ndim == 0 else out


def ray_membership(point: complex, region: RegionUnion, rtol: float = BOUNDARY_RTOL) -> bool:
    """Membership for the ``p = 2`` union of rays ``[A n**2/4, inf)``."""
    return any(region.slice(lo).contains(point, rtol) for lo, _ in region.params.alpha_sq_intervals)


def eigenvalue_from_lambda(A: float, n: int, lam: complex) -> complex:
    return complex(A * lam * (n - lam))


def parametrize_spectrum_set(q: float, s: float, A: float, n: int) -> complex:
    return complex(A * (s * s + n * n / q * (1 - 1 / q)), A * s * n * (1 - 2 / q))


def invert_parametrization(point: complex, A: float, n: int, p: float) -> tuple[float, float]:
    """Recover ``(q, s)`` with ``parametrize_spectrum_set(q, s, A, n) == point``.

    Writing ``w = 2/q - 1`` the level-set equation in ``q`` becomes a
    quadratic in ``w**2`` whose positive root is unique; the map is
    monotone in ``q`` on ``[p, 2)`` so that root is the answer.
    """
    if not 1.0 <= p < 2.0:
        raise DegenerateRegionError("inversion needs 1 <= p < 2")
    x, y = point.real, point.imag
    a = A * n * n / 4
    b = x - a
    r = math.hypot(b, y)
    if b > 0:
        W = y * y / (2 * a * (r + b)) if y != 0 else 0.0
    else:
        W = (r - b) / (2 * a)
    Wp = (2 / p - 1) ** 2
    if W > Wp * (1 + 1e-12) + 1e-15:
        raise NotInRegionError(f"{point} is outside the slice parabola at p={p}, A={A}")
    W = min(W, Wp)
    if W == 0.0:
        # y == 0 beyond every finite-q vertex: only q = 2 reaches it
        return 2.0, math.sqrt(max(x / A - n * n / 4, 0.0))
    w = math.sqrt(W)
    q = 2 / (1 + w)
    if q < p:
        q = p
    s = -y / (A * n * w)
    return q, s


def conjugate_exponent(p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1)


def envelope_slope(p: float) -> float:
    """Slope ``m`` of the envelope lines ``x = +-m y`` of the slice family."""
    if p == 1.0:
        raise DegenerateRegionError("p = 1: envelope degenerates to the imaginary axis (slope 0)")
    if p == 2.0:
        raise DegenerateRegionError("p = 2: envelope undefined, slices are real rays")
    if not 1.0 < p:
        raise ValueError("p must exceed 1")
    return 2 * math.sqrt(p - 1) / abs(p - 2)


def resolvent_region(kappa: float, alpha0: float, n: int, p: float) -> Parabola:
    """Parabola whose complement lies in the resolvent set, given volume growth ``kappa``."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    k2 = (2 / _check_p(p) - 1) ** 2
    if k2 == 0.0:
        return Parabola(0.0, n * n * alpha0 * alpha0 / 4, degenerate=True)
    return Parabola(kappa * kappa * k2, n * n * alpha0 * alpha0 / 4 - kappa * kappa * k2 / 4)


def region_to_dict(params: SpectralParams, p: float | None = None, per_interval: int = 5) -> dict:
    """JSON-ready description of the regions at exponent ``p``."""
    p = params.p if p is None else p
    region = lp_contained_region(params, p)
    try:
        slope: float | None = envelope_slope(p)
    except DegenerateRegionError:
        slope = None
    containing = lp_containing_parabola(params, p)
    return {
        "n": params.n,
        "p": p,
        "alpha0": params.alpha0,
        "alpha1": params.alpha1,
        "alphaSqIntervals": [list(iv) for iv in params.alpha_sq_intervals],
        "slices": [
            {"A": A, "width": sl.width, "vertex": sl.vertex, "degenerate": sl.degenerate}
            for A, sl in region.slices(per_interval)
        ],
        "envelopeSlope": slope,
        "containing": {
            "width": containing.width,
            "vertex": containing.vertex,
            "degenerate": containing.degenerate,
        },
    }
