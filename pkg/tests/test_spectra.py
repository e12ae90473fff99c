import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moranmf.errors import NoTangency, OutOfRange
from moranmf.model import LevelSchedule, ModelParams
from moranmf.spectra import (EMPTY, BetaFunction, beta, beta_prime, beta_prime_inverse, betas, dim_joint,
                             dim_lower_level_set, dim_upper_level_set, gibbs_weight, grid_legendre,
                             landmarks, legendre, legendre_grid, level_set_curve, joint_grid,
                             revised_beta, support_dimensions, tangent_g, tangent_h, tau_closed)

import oracles

F1 = BetaFunction.from_base(16.0, 0.4)
F2 = BetaFunction.from_base(2.2, 0.45)


def test_beta_examples():
    assert beta(F1, 1.0) == pytest.approx(0.0, abs=1e-16)
    assert beta(F1, 0.0) == pytest.approx(-0.25, abs=1e-15)
    assert beta(F1, 2.0) == pytest.approx(oracles.BETA1_2, abs=1e-14)
    assert beta(F2, 2.0) == pytest.approx(oracles.BETA2_2, abs=1e-14)


def test_beta_against_direct_powers():
    for s in np.linspace(-30, 30, 61):
        assert beta(F1, s) == pytest.approx(oracles.beta_value(s, 0.4, 16.0), rel=1e-12, abs=1e-14)
        assert beta_prime(F2, s) == pytest.approx(oracles.beta_prime_value(s, 0.45, 2.2), rel=1e-11)


def test_beta_at_infinity_is_asymptote():
    asym = beta(F1, math.inf)
    assert asym.slope == F1.d_pos_inf and asym.intercept == 0.0
    assert beta(F1, -math.inf).slope == F1.d_neg_inf


def test_landmarks_match_oracle(p0):
    lm = landmarks(p0)
    for name in ("a1", "b1", "c1", "d1", "a2", "b2", "c2", "d2"):
        assert getattr(lm, name) == pytest.approx(getattr(oracles, name.upper()), abs=1e-14)
    assert lm.a1 <= lm.b1 <= lm.c1 <= lm.d1
    assert lm.a2 <= lm.b2 <= lm.c2 <= lm.d2


def test_beta_prime_endpoints():
    assert beta_prime(F1, math.inf) == pytest.approx(oracles.A1, abs=1e-15)
    assert beta_prime(F2, -math.inf) == pytest.approx(oracles.D2, abs=1e-15)
    assert beta_prime(F1, 1.0) == pytest.approx(oracles.B1, abs=1e-15)


def test_beta_prime_inverse_examples():
    assert beta_prime_inverse(F1, F1.d_one) == pytest.approx(1.0, abs=1e-9)
    assert beta_prime_inverse(F1, F1.d_pos_inf) == math.inf
    assert beta_prime_inverse(F1, F1.d_neg_inf) == -math.inf
    s = beta_prime_inverse(F1, 0.25)
    assert abs(beta_prime(F1, s) - 0.25) <= 1e-12
    assert s == pytest.approx(oracles.bisect_beta_prime_inverse(0.25, 0.4, 16.0), abs=1e-9)


def test_beta_prime_inverse_errors():
    with pytest.raises(OutOfRange, match="alpha out of range"):
        beta_prime_inverse(F1, 0.1)
    with pytest.raises(OutOfRange, match="degenerate"):
        beta_prime_inverse(BetaFunction.from_base(4.0, 0.5), 0.5)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.02, 0.98), st.floats(2.5, 50.0), st.floats(0.0, 1.0))
def test_beta_prime_inverse_round_trip(prob, base, frac):
    if abs(prob - 0.5) < 1e-6:
        return
    f = BetaFunction.from_base(base, prob)
    lo, hi = f.alpha_range
    alpha = lo + frac * (hi - lo)
    s = beta_prime_inverse(f, alpha)
    assert abs(float(beta_prime(f, s)) - alpha) <= 1e-12 * max(1.0, abs(alpha))


@settings(max_examples=100, deadline=None)
@given(st.floats(-40, 40), st.floats(-40, 40))
def test_beta_concave(s, t):
    for f in (F1, F2):
        assert beta(f, 0.5 * (s + t)) >= 0.5 * (beta(f, s) + beta(f, t)) - 1e-12


def test_legendre_examples():
    assert legendre(F1, F1.d_one) == pytest.approx(oracles.B1, abs=1e-14)
    assert legendre(F1, F1.d_zero) == pytest.approx(0.25, abs=1e-14)
    assert legendre(F1, F1.d_pos_inf) == 0.0
    assert legendre(F1, F1.d_neg_inf) == 0.0
    with pytest.raises(OutOfRange):
        legendre(F1, 0.5)


def test_legendre_conjugacy_round_trip():
    for s in np.linspace(-20, 20, 81):
        a = beta_prime(F1, s)
        assert legendre(F1, a) == pytest.approx(s * a - beta(F1, s), abs=1e-10)


def test_legendre_closed_vs_grid_200():
    for f in (F1, F2):
        lo, hi = f.alpha_range
        alphas = np.linspace(lo, hi, 202)[1:-1]
        closed = np.array([legendre(f, a) for a in alphas])
        assert np.max(np.abs(closed - legendre_grid(f, alphas))) <= 1e-6


def test_gibbs_weight_values():
    assert gibbs_weight(F1, 0.0) == 0.5
    assert gibbs_weight(F1, 1.0) == pytest.approx(0.4, abs=1e-15)
    assert gibbs_weight(F1, math.inf) == 0.0
    assert gibbs_weight(F1, -math.inf) == 1.0


def test_revised_beta_one():
    assert revised_beta(F1, "one", 0.5) == pytest.approx(-0.125, abs=1e-15)
    for s in (-3.0, 0.0, 1.0, 2.5):
        assert revised_beta(F1, "one", s) == beta(F1, s)


def test_revised_beta_two_continues_with_asymptotic_slopes():
    grid = np.linspace(0, 1, 101)
    assert np.array_equal(revised_beta(F2, "two", grid), beta(F2, grid))
    # slope beta_2'(+inf) beyond s = 1, so the value at 2 is a2, not b2
    assert revised_beta(F2, "two", 2.0) == pytest.approx(oracles.A2, abs=1e-14)
    assert revised_beta(F2, "two", -1.0) == pytest.approx(beta(F2, 0.0) - oracles.D2, abs=1e-14)
    with pytest.raises(ValueError):
        revised_beta(F2, "three", 0.0)


def test_tau_closed_examples(p0):
    assert tau_closed(p0, 1.0, "lower") == pytest.approx(0.0, abs=1e-16)
    assert tau_closed(p0, 1.0, "upper") == pytest.approx(0.0, abs=1e-16)
    assert tau_closed(p0, 2.0, "lower") == pytest.approx(oracles.BETA1_2, abs=1e-14)
    assert tau_closed(p0, 0.0, "lower") == pytest.approx(-oracles.DIM_P_X, abs=1e-14)


def test_support_dimensions(p0):
    sd = support_dimensions(p0)
    assert sd.dim_hausdorff == pytest.approx(0.25, abs=1e-15)
    assert sd.dim_packing == pytest.approx(oracles.DIM_P_X, abs=1e-14)
    assert (sd.ae_lower_local_dim, sd.ae_upper_local_dim) == pytest.approx((oracles.B1, oracles.B2), abs=1e-14)
    assert (sd.local_dim_min, sd.local_dim_max) == pytest.approx((oracles.A1, oracles.D2), abs=1e-14)


def test_lower_level_set_examples(p0):
    assert dim_lower_level_set(p0, oracles.B1, "hausdorff") == pytest.approx(oracles.B1, abs=1e-13)
    assert dim_lower_level_set(p0, oracles.C1, "hausdorff") == pytest.approx(0.25, abs=1e-12)
    assert dim_lower_level_set(p0, 0.1, "hausdorff") == EMPTY
    assert dim_lower_level_set(p0, 0.2, "packing") == pytest.approx(oracles.DIM_P_X, abs=1e-14)


def test_upper_level_set_examples(p0):
    assert dim_upper_level_set(p0, oracles.B2, "packing") == pytest.approx(oracles.B2, abs=1e-9)
    assert dim_upper_level_set(p0, oracles.B2 - 1e-12, "packing") == pytest.approx(oracles.B2, abs=1e-9)
    assert dim_upper_level_set(p0, oracles.C2, "packing") == pytest.approx(oracles.DIM_P_X, abs=1e-12)
    assert dim_upper_level_set(p0, oracles.D2, "hausdorff") == 0.0
    assert dim_upper_level_set(p0, 2.0, "packing") == EMPTY


def test_tangent_g_examples(p0):
    res = tangent_g(p0, 0.80)
    f1, f2 = betas(p0)
    assert abs(res.s * 0.80 - beta(f1, res.s) - legendre(f2, 0.80)) <= 1e-9
    assert oracles.B1 <= res.alpha_tangent <= oracles.C1
    # dense scan for the sign change of the residual
    grid = np.linspace(0, 1, 100001)
    resid = grid * 0.80 - beta(f1, grid) - legendre(f2, 0.80)
    k = int(np.argmax(resid >= 0))
    assert res.s == pytest.approx(grid[k], abs=2e-5)
    near = tangent_g(p0, oracles.B2 - 1e-9)
    assert near.alpha_tangent == pytest.approx(oracles.B1, abs=1e-6)


def test_tangent_g_monotone(p0):
    lm = landmarks(p0)
    gs = []
    for ap in np.linspace(lm.a2, lm.b2, 60, endpoint=False):
        try:
            gs.append(tangent_g(p0, float(ap)).alpha_tangent)
        except NoTangency:
            continue
    assert len(gs) > 10
    # g decreases towards beta_1'(1) as alpha' approaches beta_2'(1)
    assert np.all(np.diff(gs) <= 1e-12)


def test_tangent_g_out_of_range(p0):
    with pytest.raises(OutOfRange):
        tangent_g(p0, 0.9)


def test_tangent_h_examples(p0):
    f1, f2 = betas(p0)
    res = tangent_h(p0, 0.30)
    assert res.s > 1
    assert abs(res.s * 0.30 - beta(f2, res.s) - legendre(f1, 0.30)) <= 1e-9
    assert oracles.A2 <= res.alpha_tangent < oracles.B2
    near = tangent_h(p0, oracles.B1 + 1e-9)
    assert near.alpha_tangent == pytest.approx(oracles.B2, abs=1e-6)
    assert tangent_h(p0, landmarks(p0).b1).s == pytest.approx(1.0, abs=1e-9)


def test_dim_joint_examples(p0):
    val, tag = dim_joint(p0, oracles.B1, oracles.B2, "hausdorff")
    assert tag == "I"
    assert val == pytest.approx(oracles.B1, abs=1e-12)
    assert dim_joint(p0, 0.2, 1.5, "hausdorff") == (EMPTY, None)
    assert dim_joint(p0, 0.2, 0.5, "packing") == (EMPTY, None)


def test_dim_joint_degenerate_p_half():
    params = ModelParams(4.0, 3.0, 0.5, 0.4, LevelSchedule.two_pow_i_squared())
    val, tag = dim_joint(params, 0.5, 0.7, "hausdorff")
    assert tag == "degenerate"
    assert dim_lower_level_set(params, 0.5, "hausdorff") == pytest.approx(0.5)
    assert dim_lower_level_set(params, 0.6, "hausdorff") == EMPTY


def test_curves_and_grid(p0):
    curve = level_set_curve(p0, "upper", 50)
    assert curve.alpha.size == 50
    assert set(curve.region) == {"left", "middle", "right"}
    rows = list(curve.rows())
    assert rows[0][0] == pytest.approx(oracles.A2)
    alphas, alpha_ps, values, tags = joint_grid(p0, 10, 12, "packing")
    assert values.shape == (10, 12)
    assert all(t in ("I", "II", "III") for t in tags.ravel())


def test_grid_legendre_accepts_custom_grid():
    grid = np.linspace(-5, 5, 1001)
    val = grid_legendre(lambda s: beta(F1, s), [F1.d_one], s_grid=grid)
    assert val[0] == pytest.approx(oracles.B1, abs=1e-9)
