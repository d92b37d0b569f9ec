"""Collar model metrics and the Laplacian acting on them.

The model lives on ``(0, x1) x T^n`` with ``T^n = [0, 2 pi)^n`` the flat
torus and metric::

    g = dx**2 / (alpha(y)**2 x**2) + (1 + c x)**2 |dy|**2 / x**2

so that ``sqrt(det h) = (1 + c x)**n`` and ``d/dx log sqrt(det h) = n c / (1 + c x)``.
Everything below is exact for this family; there is no remainder term.

Most routines accept the depth either as ``x`` or as the logarithmic
coordinate ``u = log(x1 / x)``; deep in the collar ``x`` underflows long
before ``u`` becomes awkward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import optimize

from .regions import SpectralParams

_GRID = 4096


def _wrap(d):
    """Periodic displacement mapped into ``[-pi, pi)``."""
    return (np.asarray(d) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class BoundaryProfile:
    """Positive boundary function ``alpha`` on the flat n-torus.

    ``alpha(y) = a0 + (1/n) sum_i g(y_i)`` with the trigonometric polynomial
    ``g(t) = sum_k cos_coef[k-1] cos(k t) + sin_coef[k-1] sin(k t)``. With no
    coefficients the profile is the constant ``a0``. Averaging over the
    coordinates keeps the range of ``alpha`` independent of ``n``.
    """

    n: int
    a0: float
    cos_coef: tuple[float, ...] = ()
    sin_coef: tuple[float, ...] = ()
    alpha0: float = field(init=False)
    alpha1: float = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        k = max(len(self.cos_coef), len(self.sin_coef))
        cos_c = tuple(float(v) for v in self.cos_coef) + (0.0,) * (k - len(self.cos_coef))
        sin_c = tuple(float(v) for v in self.sin_coef) + (0.0,) * (k - len(self.sin_coef))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "cos_coef", cos_c)
        object.__setattr__(self, "sin_coef", sin_c)
        if self.is_constant:
            if self.a0 <= 0:
                raise ValueError("alpha must be positive")
            object.__setattr__(self, "alpha0", float(self.a0))
            object.__setattr__(self, "alpha1", float(self.a0))
            return
        gmin, gmax, lower = self._g_extrema()
        if self.a0 + lower <= 0:
            raise ValueError("trigonometric profile is not certified positive on the torus")
        object.__setattr__(self, "alpha0", float(self.a0 + gmin))
        object.__setattr__(self, "alpha1", float(self.a0 + gmax))

    @classmethod
    def constant(cls, n: int, value: float) -> "BoundaryProfile":
        return cls(n, value)

    @classmethod
    def parse(cls, n: int, text: str) -> "BoundaryProfile":
        """Parse ``"constant:2"`` or ``"trig:a0,a1,b1,a2,b2,..."``."""
        kind, _, rest = text.partition(":")
        kind = kind.strip().lower()
        try:
            values = [float(v) for v in rest.split(",") if v.strip()]
        except ValueError as exc:
            raise ValueError(f"bad alpha profile {text!r}") from exc
        if kind == "constant" and len(values) == 1:
            return cls(n, values[0])
        if kind == "trig" and values:
            tail = values[1:]
            return cls(n, values[0], tuple(tail[0::2]), tuple(tail[1::2]))
        raise ValueError(f"bad alpha profile {text!r}; expected constant:<c> or trig:a0,a1,b1,...")

    def spec_string(self) -> str:
        if self.is_constant:
            return f"constant:{self.a0!r}"
        coefs = [self.a0]
        for a, b in zip(self.cos_coef, self.sin_coef):
            coefs += [a, b]
        return "trig:" + ",".join(repr(v) for v in coefs)

    @property
    def is_constant(self) -> bool:
        return not any(self.cos_coef) and not any(self.sin_coef)

    def _g(self, t, deriv: int = 0):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for k, (a, b) in enumerate(zip(self.cos_coef, self.sin_coef), start=1):
            if deriv == 0:
                out = out + a * np.cos(k * t) + b * np.sin(k * t)
            elif deriv == 1:
                out = out + k * (-a * np.sin(k * t) + b * np.cos(k * t))
            else:
                out = out - k * k * (a * np.cos(k * t) + b * np.sin(k * t))
        return out

    def _lipschitz(self, deriv: int = 0) -> float:
        return sum(k ** (deriv + 1) * (abs(a) + abs(b))
                   for k, (a, b) in enumerate(zip(self.cos_coef, self.sin_coef), start=1))

    def _g_extrema(self) -> tuple[float, float, float]:
        t = np.linspace(0, 2 * np.pi, _GRID, endpoint=False)
        g = self._g(t)
        h = 2 * np.pi / _GRID
        out = []
        for sign in (1.0, -1.0):
            i = int(np.argmin(sign * g))
            res = optimize.minimize_scalar(lambda s: sign * float(self._g(s)),
                                           bounds=(t[i] - h, t[i] + h), method="bounded",
                                           options={"xatol": 1e-13})
            out.append(min(sign * g[i], float(res.fun)) * sign)
        lower = float(g.min()) - self._lipschitz() * h / 2
        return out[0], out[1], lower

    def argmax_1d(self) -> float:
        """A coordinate value where ``g`` (hence ``alpha`` on the diagonal) is maximal."""
        if self.is_constant:
            return 0.0
        t = np.linspace(0, 2 * np.pi, _GRID, endpoint=False)
        i = int(np.argmax(self._g(t)))
        h = 2 * np.pi / _GRID
        res = optimize.minimize_scalar(lambda s: -float(self._g(s)), bounds=(t[i] - h, t[i] + h),
                                       method="bounded", options={"xatol": 1e-13})
        return float(res.x) % (2 * np.pi)

    def alpha(self, y):
        """Evaluate ``alpha`` at torus points ``y`` of shape ``(..., n)``."""
        y = np.asarray(y, dtype=float)
        if self.is_constant:
            return np.full(y.shape[:-1], self.a0)
        return self.a0 + self._g(y).mean(axis=-1)

    def grad_alpha(self, y):
        y = np.asarray(y, dtype=float)
        if self.is_constant:
            return np.zeros_like(y)
        return self._g(y, 1) / self.n

    def grad_log_alpha(self, y):
        return self.grad_alpha(y) / self.alpha(y)[..., None]

    def lipschitz_alpha(self) -> float:
        """Euclidean Lipschitz bound for ``alpha`` on the torus."""
        return self._lipschitz(0) / math.sqrt(self.n)

    @property
    def alpha_sq_intervals(self) -> tuple[tuple[float, float], ...]:
        # the torus is connected, so the image is one interval (or a point)
        return ((self.alpha0**2, self.alpha1**2),)

    def spectral_params(self, p: float = 1.0) -> SpectralParams:
        return SpectralParams(self.n, self.alpha0, self.alpha1, self.alpha_sq_intervals, p)


@dataclass(frozen=True)
class ModelMetric:
    """Collar metric with depth ``x1``, warping ``c`` and compact-part volume.

    ``h(x) = (1 + c x)**2`` times the flat torus metric; ``c = 0`` makes
    the boundary metric independent of ``x``.
    """

    profile: BoundaryProfile
    x1: float = 1.0
    c: float = 0.0
    compact_volume: float = 0.0

    def __post_init__(self):
        if self.x1 <= 0:
            raise ValueError("x1 must be positive")
        if self.c < 0:
            raise ValueError("c must be non-negative")
        if self.compact_volume < 0:
            raise ValueError("compact_volume must be non-negative")

    @classmethod
    def from_mapping(cls, spec: Mapping[str, object]) -> "ModelMetric":
        n = int(spec["n"])  # type: ignore[arg-type]
        profile = BoundaryProfile.parse(n, str(spec["alpha"]))
        return cls(profile, float(spec.get("x1", 1.0)), float(spec.get("c", 0.0)),  # type: ignore[arg-type]
                   float(spec.get("compact_volume", 0.0)))  # type: ignore[arg-type]

    @property
    def n(self) -> int:
        return self.profile.n

    @property
    def torus_volume(self) -> float:
        return (2 * np.pi) ** self.n

    def x_of_u(self, u):
        return self.x1 * np.exp(-np.asarray(u, dtype=float))

    def sqrt_h(self, x):
        return (1 + self.c * np.asarray(x, dtype=float)) ** self.n

    def dlog_sqrt_h(self, x):
        return self.n * self.c / (1 + self.c * np.asarray(x, dtype=float))

    def h_inverse_factor(self, x):
        """Scalar ``s`` with ``h^{ij} = s(x) delta^{ij}``."""
        return (1 + self.c * np.asarray(x, dtype=float)) ** -2


def volume_density(metric: ModelMetric, x, y):
    """Riemannian density ``x**(-n-1) sqrt(h) / alpha`` in ``(x, y)`` coordinates."""
    x = np.asarray(x, dtype=float)
    return x ** (-metric.n - 1) * metric.sqrt_h(x) / metric.profile.alpha(y)


def apply_laplacian_monomial(metric: ModelMetric, lam: complex, x, y):
    """``Delta x**lam`` for the model metric (the y-derivatives of ``x**lam`` vanish)."""
    x = np.asarray(x, dtype=float)
    n = metric.n
    a2 = metric.profile.alpha(y) ** 2
    xl = np.exp(lam * np.log(x))
    return a2 * lam * (n - lam) * xl - a2 * lam * x * xl * metric.dlog_sqrt_h(x)


LAPLACIAN_PARTS = ("eigen", "phi1", "h1", "phi2", "h2", "lap_b", "grad_b")


def laplacian_parts_scaled(metric: ModelMetric, lam: complex, u, y, phi, bump) -> dict:
    """Pieces of ``Delta(phi(x) b(y) x**lam)`` divided by ``x**lam``.

    ``u`` and ``y`` are broadcast against each other (``y`` carries a
    trailing axis of length n). ``phi.profile(u)`` must return
    ``(phi, x phi', x**2 phi'')`` and ``bump.evaluate(y)`` must return
    ``(b, grad b, flat Laplacian sum_i d_i**2 b)``.

    Returned keys, in the order the expansion lists them:

    ``eigen``   alpha**2 lam (n - lam) phi b
    ``phi1``    alpha**2 (n - 2 lam - 1) (x phi') b
    ``h1``      -alpha**2 lam phi b (x d_x log sqrt h)
    ``phi2``    -alpha**2 (x**2 phi'') b
    ``h2``      -alpha**2 (x phi') b (x d_x log sqrt h)
    ``lap_b``   phi x**2 Delta_h b
    ``grad_b``  phi x**2 h^{ij} d_i(log alpha) d_j b
    """
    n = metric.n
    u = np.asarray(u, dtype=float)
    x = metric.x_of_u(u)
    ph0, ph1, ph2 = phi.profile(u)
    b, gb, lapb = bump.evaluate(y)
    a2 = metric.profile.alpha(y) ** 2
    xl = x * metric.dlog_sqrt_h(x)
    q = x * x * metric.h_inverse_factor(x)
    dot = np.sum(metric.profile.grad_log_alpha(y) * gb, axis=-1)
    return {
        "eigen": a2 * lam * (n - lam) * ph0 * b,
        "phi1": a2 * (n - 2 * lam - 1) * ph1 * b,
        "h1": -a2 * lam * ph0 * b * xl,
        "phi2": -a2 * ph2 * b,
        "h2": -a2 * ph1 * b * xl,
        # Delta_h = -(1+cx)^-2 sum_i d_i^2 on the flat torus
        "lap_b": -ph0 * q * lapb,
        # +: the gradient of alpha enters through sqrt(det g) = x^{-n-1} sqrt(h) / alpha
        "grad_b": ph0 * q * dot,
    }


def apply_laplacian_product(metric: ModelMetric, lam: complex, phi, bump, x, y, parts: bool = False):
    """``Delta F`` for ``F = phi(x) b(y) x**lam``, optionally split into its pieces."""
    x = np.asarray(x, dtype=float)
    u = np.log(metric.x1 / x)
    pieces = laplacian_parts_scaled(metric, lam, u, y, phi, bump)
    scale = np.exp(lam * np.log(x))
    pieces = {k: v * scale for k, v in pieces.items()}
    total = sum(pieces[k] for k in LAPLACIAN_PARTS)
    if parts:
        return total, pieces
    return total


def collar_distance(metric: ModelMetric, x, y):
    """Radial distance ``log(x1/x) / alpha(y)`` from the slice ``x = x1``."""
    return np.log(metric.x1 / np.asarray(x, dtype=float)) / metric.profile.alpha(y)
