"""Approximate eigenfunctions ``F = phi(x) b(y) x**lam`` and their residuals.

All depth integrals run in ``u = log(x1/x)``. With ``Re(lam) = n/p`` the
factor ``|x**lam|**p`` exactly cancels the ``x**-n`` of the volume density
in these coordinates, so every integrand is bounded and the cutoff depth
``L = log(x1/delta)`` can be astronomically large without underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize, special

from .errors import CouplingError, EmptyPreimageError
from .geometry import BoundaryProfile, ModelMetric, laplacian_parts_scaled, _wrap
from .regions import eigenvalue_from_lambda

LOG2 = math.log(2.0)
TERM_NAMES = ("I", "II", "III", "IV", "V", "VI", "VII")
# expansion pieces feeding each residual term (I is eigen - Lambda F)
_TERM_PARTS = ("eigen", "phi1", "h1", "phi2", "h2", "lap_b", "grad_b")


@lru_cache(maxsize=None)
def smoothstep(k: int) -> Polynomial:
    """Degree ``2k+1`` polynomial rising from 0 to 1 on [0, 1], flat to order k at both ends."""
    coef = np.zeros(2 * k + 2)
    for j in range(k + 1):
        coef[k + 1 + j] = math.comb(k + j, j) * math.comb(2 * k + 1, k - j) * (-1) ** j
    return Polynomial(coef)


@dataclass(frozen=True)
class CutoffPhi:
    """Cutoff in the depth variable with ``delta = x1 exp(-L)``.

    ``phi`` vanishes for ``x <= delta`` and at ``x1``, equals 1 on
    ``[2 delta, x1/2]``, and uses a smoothstep of order ``k`` in ``x`` on the
    two transition intervals, so ``|phi'| <~ 1/delta`` and
    ``|phi''| <~ 1/delta**2`` near the deep end.
    """

    L: float
    x1: float = 1.0
    k: int = 2

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("smoothness order k must be >= 2")
        if not self.L > max(2 * LOG2, math.log(2 * self.x1)):
            raise ValueError(f"L={self.L} too small: need 2 delta < min(x1/2, 1)")

    @property
    def delta(self) -> float:
        return self.x1 * math.exp(-self.L)

    @property
    def support_u(self) -> tuple[float, float]:
        return (0.0, float(self.L))

    def profile(self, u):
        """``(phi, x phi', x**2 phi'')`` at depths ``u``."""
        u = np.asarray(u, dtype=float)
        S = smoothstep(self.k)
        S1, S2 = S.deriv(1), S.deriv(2)
        ph0 = np.where((u > LOG2) & (u < self.L - LOG2), 1.0, 0.0)
        ph1 = np.zeros_like(u)
        ph2 = np.zeros_like(u)

        top = (u >= 0) & (u <= LOG2)
        e = np.exp(-u[top])
        t = 2 - 2 * e
        ph0[top] = S(t)
        ph1[top] = -2 * e * S1(t)
        ph2[top] = 4 * e * e * S2(t)

        low = (u >= self.L - LOG2) & (u <= self.L)
        r = np.exp(self.L - u[low])
        t = r - 1
        ph0[low] = S(t)
        ph1[low] = r * S1(t)
        ph2[low] = r * r * S2(t)
        return ph0, ph1, ph2

    def _at_x(self, x):
        x = np.asarray(x, dtype=float)
        return x, self.profile(np.log(self.x1 / x))

    def __call__(self, x):
        return self._at_x(x)[1][0]

    def d1(self, x):
        x, (_, p1, _) = self._at_x(x)
        return p1 / x

    def d2(self, x):
        x, (_, _, p2) = self._at_x(x)
        return p2 / (x * x)


@dataclass(frozen=True)
class BumpB:
    """Radial bump ``exp(1 - 1/(1 - |y - center|**2 / radius**2))`` on the torus.

    ``radius = inf`` stands for ``b == 1``. Distances are periodic, and a
    radius of at most ``pi`` keeps the ball embedded in the torus.
    """

    n: int
    center: tuple[float, ...]
    radius: float = math.inf
    order: int = 2

    def __post_init__(self):
        if len(self.center) != self.n:
            raise ValueError("center must have n coordinates")
        if not (self.radius > 0):
            raise ValueError("radius must be positive")
        if math.isfinite(self.radius) and self.radius > math.pi * (1 + 1e-12):
            raise ValueError("bump radius exceeds the torus injectivity radius pi")
        if self.order < 1:
            raise ValueError("order N must be >= 1")
        object.__setattr__(self, "center", tuple(float(c) % (2 * math.pi) for c in self.center))

    @classmethod
    def constant(cls, n: int) -> "BumpB":
        return cls(n, (0.0,) * n)

    @property
    def is_constant(self) -> bool:
        return math.isinf(self.radius)

    def evaluate(self, y):
        """``(b, grad b, sum_i d_i**2 b)`` at torus points ``y`` of shape ``(..., n)``."""
        y = np.asarray(y, dtype=float)
        if self.is_constant:
            return np.ones(y.shape[:-1]), np.zeros(y.shape), np.zeros(y.shape[:-1])
        d = _wrap(y - np.asarray(self.center))
        r2 = self.radius**2
        s = np.sum(d * d, axis=-1) / r2
        inside = s < 1 - 2e-3  # exp(1 - 1/(1-s)) underflows beyond this
        w = np.where(inside, 1.0 / np.where(inside, 1 - s, 1.0), 0.0)
        g = np.where(inside, np.exp(1 - w), 0.0)
        g1 = -g * w * w
        g2 = g * (w**4 - 2 * w**3)
        grad = (2 * g1 / r2)[..., None] * d
        lap = g2 * 4 * s / r2 + g1 * 2 * self.n / r2
        return g, grad, lap

    def __call__(self, y):
        return self.evaluate(y)[0]


def torus_rule(n: int, bump: BumpB, profile: BoundaryProfile, m: int | None = None):
    """Quadrature nodes and weights on the torus adapted to ``bump``.

    * ``b`` and ``alpha`` constant: one node carrying the torus volume.
    * ``alpha`` constant, finite bump: every integrand is radial about the
      center, so a radial Gauss rule along one ray is exact up to the 1-D error.
    * otherwise a midpoint grid on the bump's bounding box (or the periodic
      trapezoid on the whole torus when ``b == 1``).
    """
    vol = (2 * math.pi) ** n
    if bump.is_constant and profile.is_constant:
        return np.zeros((1, n)), np.array([vol])
    if profile.is_constant:
        panels = 8
        q = (m or 96) // panels
        xg, wg = np.polynomial.legendre.leggauss(q)
        edges = np.linspace(0.0, bump.radius, panels + 1)
        rho = np.concatenate([0.5 * (b - a) * xg + 0.5 * (a + b) for a, b in zip(edges[:-1], edges[1:])])
        wr = np.concatenate([0.5 * (b - a) * wg for a, b in zip(edges[:-1], edges[1:])])
        sphere = 2 * math.pi ** (n / 2) / special.gamma(n / 2)
        pts = np.tile(np.asarray(bump.center), (len(rho), 1))
        pts[:, 0] += rho
        return pts, sphere * rho ** (n - 1) * wr
    if m is None:
        m = {1: 512, 2: 96, 3: 24}.get(n, 12)
    if bump.is_constant:
        t = np.arange(m) * (2 * math.pi / m)
        cell = 2 * math.pi / m
        offset = np.zeros(n)
    else:
        cell = 2 * bump.radius / m
        t = -bump.radius + (np.arange(m) + 0.5) * cell
        offset = np.asarray(bump.center)
    mesh = np.stack(np.meshgrid(*([t] * n), indexing="ij"), axis=-1).reshape(-1, n) + offset
    if not bump.is_constant:
        keep = np.sum((mesh - offset) ** 2, axis=-1) < bump.radius**2
        mesh = mesh[keep]
    return mesh, np.full(len(mesh), cell**n)


def _gauss_panels(a: float, b: float, panels: int, q: int):
    xg, wg = np.polynomial.legendre.leggauss(q)
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)
    nodes = (0.5 * h[:, None] * xg[None, :] + 0.5 * (edges[:-1] + edges[1:])[:, None]).ravel()
    weights = (0.5 * h[:, None] * wg[None, :]).ravel()
    return nodes, weights


def depth_rule(L: float, transition_panels: int = 8, q: int = 16):
    """Composite Gauss-Legendre nodes on ``u in [0, L]``.

    Panels are refined on the two cutoff transitions and on the first 40
    units of the plateau (where ``c x`` terms still vary); the rest of the
    plateau integrand is constant to machine precision.
    """
    parts = [_gauss_panels(0.0, LOG2, transition_panels, q)]
    a, b = LOG2, L - LOG2
    fine_end = min(b, a + 40.0)
    if fine_end > a:
        parts.append(_gauss_panels(a, fine_end, max(1, int(math.ceil((fine_end - a) / 0.5))), 8))
    if b > fine_end:
        parts.append(_gauss_panels(fine_end, b, 1, 8))
    parts.append(_gauss_panels(L - LOG2, L, transition_panels, q))
    u = np.concatenate([p[0] for p in parts])
    w = np.concatenate([p[1] for p in parts])
    return u, w


@dataclass(frozen=True)
class Quasimode:
    """Evaluable ``F(x, y) = phi(x) b(y) x**lam``."""

    lam: complex
    phi: CutoffPhi
    bump: BumpB

    @property
    def n(self) -> int:
        return self.bump.n

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        return self.phi(x) * self.bump(y) * np.exp(self.lam * np.log(x))


@dataclass(frozen=True)
class QuasimodeSpec:
    """Parameters of one quasimode: exponent, curvature value, accuracy, depth.

    The invariant ``Re(lam) = n/p`` is enforced at construction.
    """

    p: float
    A: float
    epsilon: float
    quasimode: Quasimode

    def __post_init__(self):
        if not 1.0 <= self.p <= 2.0:
            raise ValueError("p must lie in [1,2]")
        if self.epsilon <= 0 or self.A <= 0:
            raise ValueError("epsilon and A must be positive")
        _check_regime(self.quasimode, self.p)

    @property
    def n(self) -> int:
        return self.quasimode.n

    @property
    def lam(self) -> complex:
        return self.quasimode.lam

    @property
    def L(self) -> float:
        return self.quasimode.phi.L

    @property
    def bump(self) -> BumpB:
        return self.quasimode.bump

    @property
    def Lambda(self) -> complex:
        return eigenvalue_from_lambda(self.A, self.n, self.lam)

    def coupling_depth(self) -> float:
        return coupling_depth(self.epsilon, self.p, self.bump.radius, self.bump.order)

    def with_depth(self, L: float) -> "QuasimodeSpec":
        return replace(self, quasimode=replace(self.quasimode, phi=replace(self.quasimode.phi, L=L)))


def _check_regime(F: Quasimode, p: float):
    target = F.n / p
    if abs(F.lam.real - target) > 1e-12 * max(1.0, target):
        raise ValueError(f"unsupported regime: Re(lambda)={F.lam.real} but n/p={target}")


def coupling_depth(epsilon: float, p: float, radius: float, order: int) -> float:
    """Smallest admissible depth: ``L > radius**(-N p) epsilon**(-p)``."""
    if math.isinf(radius):
        return 0.0
    return (radius ** (-order) / epsilon) ** p


def find_bump_ball(profile: BoundaryProfile, A: float, epsilon: float, order: int = 2,
                   tol: float = 1e-9) -> BumpB:
    """Largest ball on which ``|alpha**2 - A| < epsilon``, as a bump.

    The ball is centered where ``|alpha**2 - A|`` is minimal; its radius is
    found by bisection, each trial ball checked on a sample grid with a
    Lipschitz margin so the returned ball is certified.
    """
    n = profile.n
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    scale = tol * max(1.0, A)
    if profile.is_constant:
        if abs(profile.a0**2 - A) > scale:
            raise EmptyPreimageError(f"A={A} is not alpha**2={profile.a0**2}")
        return BumpB(n, (0.0,) * n, math.pi, order)
    if not profile.alpha0**2 - scale <= A <= profile.alpha1**2 + scale:
        raise EmptyPreimageError(f"A={A} outside [{profile.alpha0**2}, {profile.alpha1**2}]")

    # alpha is a0 + mean_i g(y_i), so the diagonal y = (t, ..., t) reaches the full range
    target = math.sqrt(A) - profile.a0
    tg = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    i = int(np.argmin(np.abs(profile._g(tg) - target)))
    h = tg[1]
    res = optimize.minimize_scalar(lambda t: abs(float(profile._g(t)) - target),
                                   bounds=(tg[i] - h, tg[i] + h), method="bounded",
                                   options={"xatol": 1e-14})
    t0 = float(res.x) if res.fun <= abs(profile._g(tg[i]) - target) else float(tg[i])
    center = np.full(n, t0 % (2 * np.pi))

    lip = 2 * profile.alpha1 * profile.lipschitz_alpha()
    per_dim = {1: 1024, 2: 48, 3: 12}.get(n, 6)

    def worst(r: float) -> float:
        hstep = r / per_dim
        t = np.linspace(-r, r, 2 * per_dim + 1)
        mesh = np.stack(np.meshgrid(*([t] * n), indexing="ij"), axis=-1).reshape(-1, n)
        if n > 1:
            mesh = mesh[np.sum(mesh * mesh, axis=-1) <= (r + hstep * math.sqrt(n)) ** 2]
        dev = np.abs(profile.alpha(center + mesh) ** 2 - A).max()
        return float(dev + lip * hstep * math.sqrt(n) / 2)

    if abs(profile.alpha(center) ** 2 - A) >= epsilon:
        raise EmptyPreimageError("preimage too thin to contain a ball at this epsilon")
    if worst(math.pi) < epsilon:
        return BumpB(n, tuple(center), math.pi, order)
    lo, hi = 0.0, math.pi
    while hi - lo > 1e-10 * hi:
        mid = 0.5 * (lo + hi)
        if worst(mid) < epsilon:
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise EmptyPreimageError("no certified ball found")
    return BumpB(n, tuple(center), lo, order)


@dataclass
class ResidualReport:
    p: float
    A: float
    epsilon: float
    L: float
    lam: complex
    Lambda: complex
    norm_F: float
    terms: tuple[float, ...]
    total: float
    c_pass: float = 3.0
    bump_radius: float = math.inf
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.total / self.norm_F

    @property
    def passed(self) -> bool:
        return bool(self.ratio <= self.c_pass * self.epsilon)

    def term(self, name: str) -> float:
        return self.terms[TERM_NAMES.index(name)]

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "A": self.A,
            "epsilon": self.epsilon,
            "L": self.L,
            "lambda": {"re": self.lam.real, "im": self.lam.imag},
            "Lambda": {"re": self.Lambda.real, "im": self.Lambda.imag},
            "norms": {"F": self.norm_F, "terms": list(self.terms), "total": self.total},
            "ratio": self.ratio,
            "pass": self.passed,
            "bumpRadius": None if math.isinf(self.bump_radius) else self.bump_radius,
        }


def _rules(F: Quasimode, metric: ModelMetric, torus_m: int | None):
    u, wu = depth_rule(F.phi.L)
    y, wy = torus_rule(metric.n, F.bump, metric.profile, torus_m)
    x = metric.x_of_u(u)
    # density in (u, y) once |x^lam|^p x^-n has cancelled
    wu = wu * metric.sqrt_h(x)
    wy = wy / metric.profile.alpha(y)
    return u, wu, y, wy


def lp_norm(F: Quasimode, p: float, metric: ModelMetric, torus_m: int | None = None) -> float:
    """``||F||_p`` with respect to the Riemannian volume of the collar."""
    _check_regime(F, p)
    u, wu, y, wy = _rules(F, metric, torus_m)
    ph0 = F.phi.profile(u)[0]
    b = F.bump(y)
    return float((np.sum(wu * np.abs(ph0) ** p) * np.sum(wy * np.abs(b) ** p)) ** (1 / p))


def bump_norm(bump: BumpB, p: float, profile: BoundaryProfile, weight_alpha: bool = False,
              torus_m: int | None = None) -> float:
    """``||b||_p`` over the flat torus (optionally with the ``1/alpha`` weight)."""
    y, wy = torus_rule(bump.n, bump, profile, torus_m)
    if weight_alpha:
        wy = wy / profile.alpha(y)
    return float(np.sum(wy * np.abs(bump(y)) ** p) ** (1 / p))


def norm_bounds(F: Quasimode, p: float, metric: ModelMetric, torus_m: int | None = None):
    """Explicit lower and upper bounds on ``||F||_p**p``.

    ``(L - 2 log 2) min(sqrt h / alpha) ||b||_p**p`` and
    ``L max(sqrt h / alpha) ||b||_p**p``, extremes taken over the supports.
    """
    _check_regime(F, p)
    L = F.phi.L
    bp = bump_norm(F.bump, p, metric.profile, torus_m=torus_m) ** p
    y, _ = torus_rule(metric.n, F.bump, metric.profile, torus_m)
    inv_alpha = 1 / metric.profile.alpha(y[F.bump(y) > 0])
    lo = (L - 2 * LOG2) * 1.0 * inv_alpha.min() * bp
    hi = L * float(metric.sqrt_h(metric.x1)) * inv_alpha.max() * bp
    return lo, hi


def residual(spec: QuasimodeSpec, metric: ModelMetric, c_pass: float = 3.0,
             torus_m: int | None = None, chunk: int = 64) -> ResidualReport:
    """``||Delta F - Lambda F||_p`` together with the seven term norms I..VII."""
    F = spec.quasimode
    p = spec.p
    _check_regime(F, p)
    if F.n != metric.n:
        raise ValueError("quasimode and metric dimensions differ")
    u, wu, y, wy = _rules(F, metric, torus_m)
    Lam = spec.Lambda
    lam = F.lam
    acc_terms = np.zeros(7)
    acc_total = 0.0
    acc_F = 0.0
    for start in range(0, len(u), chunk):
        uu = u[start:start + chunk, None]
        w = wu[start:start + chunk, None] * wy[None, :]
        parts = laplacian_parts_scaled(metric, lam, uu, y[None, :, :], F.phi, F.bump)
        Fs = F.phi.profile(uu)[0] * F.bump(y)[None, :]
        pieces = [parts[k] for k in _TERM_PARTS]
        pieces[0] = pieces[0] - Lam * Fs
        total = sum(pieces)
        for i, t in enumerate(pieces):
            acc_terms[i] += np.sum(w * np.abs(t) ** p)
        acc_total += float(np.sum(w * np.abs(total) ** p))
        acc_F += float(np.sum(w * np.abs(Fs) ** p))
    return ResidualReport(
        p=p, A=spec.A, epsilon=spec.epsilon, L=spec.L, lam=lam, Lambda=Lam,
        norm_F=acc_F ** (1 / p), terms=tuple(float(v) for v in acc_terms ** (1 / p)),
        total=acc_total ** (1 / p), c_pass=c_pass, bump_radius=F.bump.radius,
    )


def verify_quasimode(spec: QuasimodeSpec, metric: ModelMetric, c_pass: float = 3.0,
                     **kw) -> tuple[float, bool, ResidualReport]:
    """Check ``||Delta F - Lambda F||_p <= c_pass * epsilon * ||F||_p``."""
    need = spec.coupling_depth()
    if not spec.L > need:
        raise CouplingError(f"L={spec.L:.6g} must exceed r^(-Np) eps^(-p) = {need:.6g}")
    rep = residual(spec, metric, c_pass=c_pass, **kw)
    return rep.ratio, rep.passed, rep


def required_depth(spec: QuasimodeSpec, metric: ModelMetric, torus_m: int | None = None) -> float:
    """Depth making terms II..VII at most ``epsilon ||F||_p``, constants measured.

    The remainder II + ... + VII is essentially independent of ``L``, while
    ``||F||_p**p >= (L - 2 log 2) int |b|**p / alpha``; solving for ``L``
    gives the depth. Two passes absorb the weak ``L``-dependence.
    """
    F = spec.quasimode
    mass = bump_norm(F.bump, spec.p, metric.profile, weight_alpha=True, torus_m=torus_m) ** spec.p
    L = max(spec.L, 8 * LOG2)
    out = L
    for _ in range(2):
        rep = residual(spec.with_depth(L), metric, torus_m=torus_m)
        rest = sum(rep.terms[1:])
        L = 2 * LOG2 + (rest / spec.epsilon) ** spec.p / mass
        L = max(L, 4 * LOG2 + 1e-9)
        out = max(out, L)
    return out


def make_quasimode(metric: ModelMetric, p: float, A: float, epsilon: float, s: float = 0.0,
                   k: int = 2, order: int = 2, L: float | None = None,
                   bump: BumpB | None = None, torus_m: int | None = None) -> QuasimodeSpec:
    """Assemble a ``QuasimodeSpec`` with ``lam = n/p + i s``.

    Without an explicit ``bump`` the ball is taken where
    ``|alpha**2 lam (n - lam) - Lambda| < epsilon``, i.e. ``alpha**2`` within
    ``epsilon / |lam (n - lam)|`` of ``A``. Without an explicit ``L`` the depth
    is the larger of the coupling bound and the measured requirement.
    """
    n = metric.n
    lam = complex(n / p, s)
    if bump is None:
        mult = abs(lam * (n - lam))
        bump = find_bump_ball(metric.profile, A, epsilon / mult if mult > 0 else epsilon, order)
    need = coupling_depth(epsilon, p, bump.radius, bump.order)
    L0 = L if L is not None else max(8 * LOG2, need * (1 + 1e-9) + 1e-9)
    spec = QuasimodeSpec(p, A, epsilon, Quasimode(lam, CutoffPhi(L0, metric.x1, k), bump))
    if L is None:
        L1 = max(L0, required_depth(spec, metric, torus_m))
        spec = spec.with_depth(L1)
    return spec


def spectral_sample(specs) -> list[dict]:
    """``Lambda`` values witnessed by verified quasimodes, with ``(A, q, s)``."""
    return [{"Lambda": s.Lambda, "A": s.A, "q": s.p, "s": s.lam.imag} for s in specs]
