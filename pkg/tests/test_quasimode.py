import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from lpspec.errors import CouplingError, EmptyPreimageError
from lpspec.geometry import BoundaryProfile, ModelMetric
from lpspec.quasimode import (
    LOG2,
    TERM_NAMES,
    BumpB,
    CutoffPhi,
    Quasimode,
    QuasimodeSpec,
    coupling_depth,
    depth_rule,
    find_bump_ball,
    lp_norm,
    make_quasimode,
    norm_bounds,
    residual,
    smoothstep,
    spectral_sample,
    torus_rule,
    verify_quasimode,
)
from lpspec.regions import SpectralParams, lp_contained_region, membership, ray_membership

CONST1 = ModelMetric(BoundaryProfile.constant(1, 1.0))
TRIG = ModelMetric(BoundaryProfile.parse(1, "trig:1.5,0.5"))


def const_spec(n=1, p=1.5, L=50.0, a=1.0, c=0.0, s=0.0, eps=0.1, k=2):
    m = ModelMetric(BoundaryProfile.constant(n, a), c=c)
    F = Quasimode(complex(n / p, s), CutoffPhi(L, 1.0, k), BumpB.constant(n))
    return QuasimodeSpec(p, a * a, eps, F), m


# --- cutoff -----------------------------------------------------------------

@pytest.mark.parametrize("k", [2, 3, 5])
def test_smoothstep_flatness(k):
    S = smoothstep(k)
    assert S(0) == 0 and S(1) == pytest.approx(1.0)
    for j in range(1, k + 1):
        assert S.deriv(j)(0) == pytest.approx(0, abs=1e-10)
        assert S.deriv(j)(1) == pytest.approx(0, abs=1e-9)
    t = np.linspace(0, 1, 1001)
    assert np.all(np.diff(S(t)) >= -1e-12)  # rounding of the large coefficients


def test_cutoff_invariants():
    phi = CutoffPhi(12.0, 2.0)
    d = phi.delta
    assert d == pytest.approx(2.0 * math.exp(-12.0))
    x = np.concatenate([np.geomspace(d * 0.5, d, 5), np.geomspace(2 * d, 1.0, 50), [2.0]])
    vals = phi(x)
    assert np.all(vals[:5] == 0) and np.all(vals[5:-1] == pytest.approx(1.0)) and vals[-1] == 0
    xs = np.linspace(d, 2 * d, 501)
    assert np.max(np.abs(phi.d1(xs))) * d <= 3.0
    assert np.max(np.abs(phi.d2(xs))) * d * d <= 12.0
    assert phi.support_u == (0.0, 12.0)
    with pytest.raises(ValueError):
        CutoffPhi(1.0, 1.0)
    with pytest.raises(ValueError):
        CutoffPhi(20.0, 1.0, k=1)


def test_cutoff_derivatives_against_finite_differences():
    phi = CutoffPhi(6.0, 1.0, 3)
    for x0 in (phi.delta * 1.3, phi.delta * 1.8, 0.6, 0.9):
        h = x0 * 1e-5
        d1 = (phi(x0 + h) - phi(x0 - h)) / (2 * h)
        d2 = (phi(x0 + h) - 2 * phi(x0) + phi(x0 - h)) / h**2
        assert phi.d1(x0) == pytest.approx(d1, rel=1e-6)
        assert phi.d2(x0) == pytest.approx(d2, rel=1e-3)


def test_support_ordering_with_epsilon():
    specs = [make_quasimode(CONST1, 1.5, 1.0, e) for e in (0.2, 0.1, 0.05)]
    Ls = [s.L for s in specs]
    assert Ls[0] < Ls[1] < Ls[2]
    # supports [delta, x1] grow strictly toward the boundary: compare log(1/delta) = L
    ends = [s.quasimode.phi.support_u[1] for s in specs]
    assert ends[0] < ends[1] < ends[2]


# --- bump ---------------------------------------------------------------------

def test_bump_values_and_derivatives():
    b = BumpB(2, (1.0, 6.0), 0.8)
    y = np.array([[1.0, 6.0], [1.3, 6.2], [1.0, 6.0 + 0.81], [1.0 + 2 * np.pi, 6.0]])
    val, grad, lap = b.evaluate(y)
    assert val[0] == pytest.approx(1.0) and val[3] == pytest.approx(1.0)
    assert val[2] == 0 and 0 < val[1] < 1
    h = 1e-5
    y0 = y[1]
    num = [(b(y0 + h * e) - b(y0 - h * e)) / (2 * h) for e in np.eye(2)]
    lap_num = sum((b(y0 + h * e) - 2 * b(y0) + b(y0 - h * e)) / h**2 for e in np.eye(2))
    assert np.allclose(grad[1], num, rtol=1e-6)
    assert lap[1] == pytest.approx(lap_num, rel=1e-4)
    with pytest.raises(ValueError):
        BumpB(1, (0.0,), 4.0)
    with pytest.raises(ValueError):
        BumpB(2, (0.0,), 1.0)


def test_bump_norm_positive_for_all_p():
    from lpspec.quasimode import bump_norm

    b = BumpB(2, (0.0, 0.0), 0.3)
    prof = BoundaryProfile.constant(2, 1.0)
    for p in (1.0, 1.3, 2.0):
        assert bump_norm(b, p, prof) > 0


def test_torus_rules_agree():
    # radial rule (alpha constant) vs box grid (forced by a variable profile)
    b = BumpB(2, (1.0, 2.0), 0.7)
    y_r, w_r = torus_rule(2, b, BoundaryProfile.constant(2, 1.0))
    flat = BoundaryProfile(2, 1.0, (1e-14,))
    y_b, w_b = torus_rule(2, b, flat, m=400)
    assert np.sum(w_r * b(y_r)) == pytest.approx(np.sum(w_b * b(y_b)), rel=1e-4)
    y1, w1 = torus_rule(3, BumpB.constant(3), BoundaryProfile.constant(3, 1.0))
    assert w1.sum() == pytest.approx((2 * np.pi) ** 3)


def test_depth_rule_integrates_exactly():
    u, w = depth_rule(300.0)
    assert w.sum() == pytest.approx(300.0, rel=1e-13)
    assert np.sum(w * np.exp(-u)) == pytest.approx(1 - math.exp(-300), rel=1e-12)


# --- bump ball ----------------------------------------------------------------

def test_find_bump_ball_constant_profile():
    b = find_bump_ball(BoundaryProfile.constant(2, 2.0), 4.0, 0.1)
    assert b.radius == math.pi
    with pytest.raises(EmptyPreimageError):
        find_bump_ball(BoundaryProfile.constant(2, 2.0), 4.5, 0.1)


def test_find_bump_ball_trig_oracle():
    prof = BoundaryProfile.parse(1, "trig:1.5,0.5")
    b = find_bump_ball(prof, 4.0, 0.1)
    assert b.center[0] == pytest.approx(0.0, abs=1e-6) or b.center[0] == pytest.approx(2 * np.pi, abs=1e-6)
    r_oracle = optimize.brentq(lambda r: (1.5 + 0.5 * math.cos(r)) ** 2 - 3.9, 0, 1)
    assert b.radius <= r_oracle
    assert b.radius == pytest.approx(r_oracle, rel=0.02)


def test_find_bump_ball_interior_value():
    prof = BoundaryProfile.parse(1, "trig:1.5,0.5")
    b = find_bump_ball(prof, 2.25, 0.05)
    assert prof.alpha(np.array([b.center])) ** 2 == pytest.approx(2.25, abs=1e-9)
    ts = b.center[0] + np.linspace(-b.radius, b.radius, 2001)
    assert np.max(np.abs(prof.alpha(ts[:, None]) ** 2 - 2.25)) < 0.05


@settings(max_examples=15, deadline=None)
@given(st.floats(1.0, 4.0), st.floats(0.01, 0.5), st.floats(0.3, 0.9))
def test_bump_radius_monotone_in_epsilon(A, eps, shrink):
    prof = BoundaryProfile.parse(1, "trig:1.5,0.5")
    r1 = find_bump_ball(prof, A, eps).radius
    r2 = find_bump_ball(prof, A, eps * shrink).radius
    assert r2 <= r1 * (1 + 1e-8)


def test_find_bump_ball_errors():
    prof = BoundaryProfile.parse(2, "trig:1.5,0.5")
    with pytest.raises(EmptyPreimageError):
        find_bump_ball(prof, 4.5, 0.1)
    with pytest.raises(ValueError):
        find_bump_ball(prof, 2.0, 0.0)


# --- norms --------------------------------------------------------------------

@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_lp_norm_constant_exact(p):
    spec, m = const_spec(n=2, p=p, a=2.0, L=40.0)
    phi = spec.quasimode.phi
    # oracle: adaptive 1-D quadrature of |phi|^p du, times Vol(T^2) / alpha
    f = lambda u: abs(float(phi.profile(np.array([u]))[0][0])) ** p
    pts = [LOG2, 40 - LOG2]
    J = integrate.quad(f, 0, 40, points=pts, limit=200, epsabs=0, epsrel=1e-12)[0]
    ref = ((2 * np.pi) ** 2 / 2.0 * J) ** (1 / p)
    assert lp_norm(spec.quasimode, p, m) == pytest.approx(ref, rel=1e-9)


def test_lp_norm_grows_like_L():
    m = CONST1
    ratios = []
    for L in (1e2, 1e3, 1e4):
        spec, _ = const_spec(p=1.5, L=L)
        ratios.append(lp_norm(spec.quasimode, 1.5, m) ** 1.5 / L)
    assert ratios[2] == pytest.approx(ratios[1], rel=1e-3)
    assert ratios[2] == pytest.approx(2 * np.pi, rel=2e-3)


def test_lp_norm_homogeneous_and_regime_checked():
    spec, m = const_spec(p=1.5)
    F = spec.quasimode
    base = lp_norm(F, 1.5, m)

    class Doubled(BumpB):
        def evaluate(self, y):
            b, g, l = super().evaluate(y)
            return 2 * b, 2 * g, 2 * l

    F2 = Quasimode(F.lam, F.phi, Doubled(1, (0.0,)))
    assert lp_norm(F2, 1.5, m) == pytest.approx(2 * base, rel=1e-12)
    with pytest.raises(ValueError, match="unsupported regime"):
        lp_norm(F, 1.2, m)


def test_spec_rejects_wrong_real_part():
    F = Quasimode(complex(0.5, 1.0), CutoffPhi(30.0), BumpB.constant(1))
    with pytest.raises(ValueError):
        QuasimodeSpec(1.5, 1.0, 0.1, F)
    with pytest.raises(ValueError):
        QuasimodeSpec(2.5, 1.0, 0.1, Quasimode(complex(0.4, 0), CutoffPhi(30.0), BumpB.constant(1)))


def test_norm_sandwich():
    m = ModelMetric(BoundaryProfile.parse(1, "trig:1.5,0.5"), c=0.3)
    for p in (1.0, 1.5, 2.0):
        spec = make_quasimode(m, p, 3.0, 0.1)
        lo, hi = norm_bounds(spec.quasimode, p, m)
        val = lp_norm(spec.quasimode, p, m) ** p
        assert lo <= val <= hi


def test_translation_invariance_constant_alpha():
    m = ModelMetric(BoundaryProfile.constant(2, 1.0), c=0.2)
    vals = []
    for center in [(0.0, 0.0), (1.0, 4.0), (6.0, 3.3)]:
        F = Quasimode(complex(2 / 1.5, 0.3), CutoffPhi(30.0), BumpB(2, center, 0.9))
        spec = QuasimodeSpec(1.5, 1.0, 0.1, F)
        rep = residual(spec, m)
        vals.append((rep.norm_F, rep.total, *rep.terms))
    assert np.allclose(vals[0], vals[1], rtol=1e-12) and np.allclose(vals[0], vals[2], rtol=1e-12)


# --- residual -----------------------------------------------------------------

@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_symmetric_case_term_vanishing(p):
    spec, m = const_spec(n=2, p=p, L=200.0)
    rep = residual(spec, m)
    for name in ("I", "III", "V", "VI", "VII"):
        assert rep.term(name) <= 1e-12 * rep.norm_F
    assert rep.term("II") > 0 and rep.term("IV") > 0
    spec_c, m_c = const_spec(n=2, p=p, L=200.0, c=0.1)
    rep_c = residual(spec_c, m_c)
    assert rep_c.term("III") > 1e-6 * rep_c.norm_F and rep_c.term("V") > 1e-6 * rep_c.norm_F


def test_total_against_x_space_quadrature():
    from lpspec.geometry import apply_laplacian_product, volume_density

    m = ModelMetric(BoundaryProfile.parse(1, "trig:1.5,0.5"), c=0.2)
    F = Quasimode(complex(1 / 2, 0.4), CutoffPhi(8.0, 1.0, 3), BumpB(1, (0.4,), 1.2))
    spec = QuasimodeSpec(2.0, 3.0, 0.1, F)
    rep = residual(spec, m)

    # y-integral by the trapezoid rule (smooth, compactly supported integrand), u by adaptive quad
    ys = np.linspace(0.4 - 1.2, 0.4 + 1.2, 1201)[:, None]

    def slab(u, what):
        x = math.exp(-u)
        val = F(x, ys) if what == "F" else apply_laplacian_product(m, F.lam, F.phi, F.bump, x, ys) - spec.Lambda * F(x, ys)
        return float(integrate.trapezoid(np.abs(val) ** 2 * volume_density(m, x, ys) * x, ys[:, 0]))

    def total(what):
        pts = [LOG2, 8 - LOG2]
        return integrate.quad(slab, 0, 8, args=(what,), points=pts, epsabs=0, epsrel=1e-9, limit=200)[0] ** 0.5

    assert rep.norm_F == pytest.approx(total("F"), rel=1e-6)
    assert rep.total == pytest.approx(total("R"), rel=1e-5)


def test_residual_triangle_inequality_and_term_I_bound():
    m = ModelMetric(BoundaryProfile.parse(1, "trig:1.5,0.5"), c=0.1)
    for A in (1.0, 2.5, 4.0):
        spec = make_quasimode(m, 1.5, A, 0.1, s=0.5)
        rep = residual(spec, m)
        assert rep.total <= sum(rep.terms) * (1 + 1e-12)
        assert rep.term("I") <= spec.epsilon * rep.norm_F


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_ratio_decays_like_L_power(p):
    spec, m = const_spec(n=1, p=p)
    Ls = np.array([1e2, 1e3, 1e4])
    ratios = [residual(spec.with_depth(L), m).ratio for L in Ls]
    slope = np.polyfit(np.log(Ls), np.log(ratios), 1)[0]
    assert slope == pytest.approx(-1 / p, rel=0.1)


def test_verify_constant_large_L_passes():
    for p in (1.0, 1.5, 2.0):
        spec, m = const_spec(n=1, p=p, L=1e4)
        ratio, ok, rep = verify_quasimode(spec, m)
        assert ok and ratio == rep.ratio


def test_coupling_violation():
    F = Quasimode(complex(1 / 1.5, 0), CutoffPhi(5.0), BumpB(1, (0.0,), 0.5))
    spec = QuasimodeSpec(1.5, 1.0, 0.1, F)
    assert coupling_depth(0.1, 1.5, 0.5, 2) == pytest.approx((4 / 0.1) ** 1.5)
    with pytest.raises(CouplingError):
        verify_quasimode(spec, CONST1)


def test_variable_alpha_epsilon_sequence():
    m = ModelMetric(BoundaryProfile.parse(1, "trig:1.5,0.5"), c=0.1)
    for p in (1.0, 1.5):
        ratios = []
        for eps in (0.2, 0.1, 0.05):
            spec = make_quasimode(m, p, 2.5, eps)
            ratio, ok, _ = verify_quasimode(spec, m)
            assert ok
            assert spec.L > spec.coupling_depth()
            ratios.append(ratio / eps)
        assert max(ratios) / min(ratios) <= 3.0


def test_variable_alpha_top_value_centered_at_maximizer():
    m = TRIG
    spec = make_quasimode(m, 1.5, m.profile.alpha1**2, 0.1)
    c = spec.bump.center[0]
    assert min(c, 2 * np.pi - c) < 1e-6
    assert verify_quasimode(spec, m)[1]


def test_report_json_shape():
    spec, m = const_spec(L=300.0)
    d = residual(spec, m).to_dict()
    assert set(d) >= {"p", "A", "epsilon", "L", "lambda", "Lambda", "norms", "ratio", "pass"}
    assert len(d["norms"]["terms"]) == len(TERM_NAMES) == 7
    assert d["lambda"] == {"re": 1 / 1.5, "im": 0.0}


# --- spectral sample ----------------------------------------------------------

def test_spectral_sample_bottom_and_membership():
    m = ModelMetric(BoundaryProfile.parse(1, "trig:1.5,0.5"))
    params = m.profile.spectral_params()
    bottom = make_quasimode(m, 2.0, m.profile.alpha0**2, 0.2)
    assert spectral_sample([bottom])[0]["Lambda"] == pytest.approx(m.profile.alpha0**2 / 4)
    specs = [make_quasimode(m, p, A, 0.2, s=s) for p in (1.0, 1.5) for A in (1.0, 3.0) for s in (0.0, 0.8)]
    for spec, row in zip(specs, spectral_sample(specs)):
        region = lp_contained_region(params, row["q"])
        assert membership(row["Lambda"], region)
        assert row["s"] == spec.lam.imag
    r2 = lp_contained_region(params, 2.0)
    assert ray_membership(spectral_sample([bottom])[0]["Lambda"], r2)


def test_conjugation_symmetry():
    m = CONST1
    a = make_quasimode(m, 1.5, 1.0, 0.1, s=0.7, L=500.0)
    b = make_quasimode(m, 1.5, 1.0, 0.1, s=-0.7, L=500.0)
    assert a.Lambda == pytest.approx(b.Lambda.conjugate())
    assert residual(a, m).ratio == pytest.approx(residual(b, m).ratio, rel=1e-12)


def test_two_dimensional_variable_profile_passes():
    m = ModelMetric(BoundaryProfile.parse(2, "trig:1.5,0.5"), c=0.1)
    spec = make_quasimode(m, 1.5, 3.0, 0.1)
    ratio, ok, rep = verify_quasimode(spec, m)
    assert ok and rep.term("I") <= spec.epsilon * rep.norm_F
