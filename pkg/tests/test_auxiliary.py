import math

import numpy as np
import pytest

from moranmf.auxiliary import (AuxSpec, Segment, build_aux, geometric_cut, gibbs_weight, lower_h_linear_cut,
                               monte_carlo_local_dims, sample_point, strong_law_extremes, strong_law_levels,
                               strong_law_sequence)
from moranmf.errors import OutOfRange
from moranmf.spectra import BetaFunction, beta, beta_prime, dim_joint, landmarks

import oracles

F1 = BetaFunction.from_base(16.0, 0.4)


def test_gibbs_weight_examples():
    assert gibbs_weight(F1, 0.0) == 0.5
    assert gibbs_weight(F1, 1.0) == pytest.approx(0.4, abs=1e-15)
    for s in np.linspace(-30, 30, 121):
        w = gibbs_weight(F1, s)
        total = 16.0 ** beta(F1, s) * (0.4 ** s + 0.6 ** s)
        assert total == pytest.approx(1.0, abs=1e-14)
        assert w == pytest.approx(16.0 ** beta(F1, s) * 0.4 ** s, rel=1e-12)


def test_aux_spec_validation():
    with pytest.raises(ValueError):
        AuxSpec((Segment(5, 0.5, "A", "x"), Segment(5, 0.5, "B", "y")), "bad")
    with pytest.raises(ValueError):
        AuxSpec((Segment(5, 1.5, "A", "x"),), "bad")
    aux = AuxSpec((Segment(3, 0.2, "A", "x"), Segment(7, 0.7, "B", "y")), "ok")
    assert aux.weights(5).tolist() == [0.2, 0.2, 0.2, 0.7, 0.7]
    assert aux.label_counts(5) == {"x": 3, "y": 2}
    assert aux.pieces(7, [2]) == [(1, 2, aux.segments[0]), (3, 3, aux.segments[0]), (4, 7, aux.segments[1])]
    with pytest.raises(ValueError):
        aux.weight(8)


def test_lower_h_at_c1_is_uniform(p0):
    aux = build_aux(p0, "lower_H", alpha=landmarks(p0).c1)
    assert all(seg.weight == pytest.approx(0.5, abs=1e-12) for seg in aux.segments)


def test_uniform_first_breakpoint(p0):
    aux = build_aux(p0, "uniform")
    r = strong_law_sequence(p0, aux, "mu", [1, 2])
    assert r.at(2) == pytest.approx(oracles.C1, abs=1e-14)


def test_lower_h_strong_law(p0):
    aux = build_aux(p0, "lower_H", alpha=0.22)
    assert strong_law_sequence(p0, aux, "mu", [p0.schedule.N(7)]).ratio[0] == pytest.approx(0.22, abs=1e-3)


def test_mu_strong_law(p0):
    aux = build_aux(p0, "mu")
    r = strong_law_sequence(p0, aux, "mu", [p0.schedule.N(7), p0.schedule.N(8)])
    assert r.ratio[0] == pytest.approx(oracles.MU_R_N7, abs=1e-12)
    assert r.ratio[1] == pytest.approx(oracles.MU_R_N8, abs=1e-12)


def test_mediant_bound(p0):
    for target in ("mu", "lower_H_linear", "upper_P_curved"):
        alpha = {"mu": None, "lower_H_linear": 0.25, "upper_P_curved": 0.95}[target]
        aux = build_aux(p0, target, alpha=alpha)
        levels = strong_law_levels(p0, aux)
        seq = strong_law_sequence(p0, aux, "mu", levels)
        assert np.all(seq.term_bounds[:, 0] <= seq.ratio + 1e-15)
        assert np.all(seq.ratio <= seq.term_bounds[:, 1] + 1e-15)


def test_lower_h_linear_cut_matches_formula(p0):
    aux = build_aux(p0, "lower_H_linear", alpha=0.25)
    n_prime = aux.constants["n_prime"]
    assert n_prime[2] == 357
    assert n_prime[2] - p0.schedule.N(2) == math.floor(oracles.FLOOR_TARGET_I1)
    prior = 0
    for i in range(1, 4):
        assert n_prime[2 * i] == lower_h_linear_cut(p0, 0.25, i, prior)
        prior += n_prime[2 * i] - p0.schedule.N(2 * i)


def test_lower_h_linear_inequality(p0):
    alpha = 0.25
    aux = build_aux(p0, "lower_H_linear", alpha=alpha)
    a1, a2 = oracles.B1, oracles.B2
    la, lb = math.log(16), math.log(2.2)
    checkpoints = {seg.end for seg in aux.segments} | set(p0.schedule.breakpoints())
    for n in sorted(checkpoints):
        counts = aux.label_counts(n)
        l1, l3 = counts.get("p", 0), counts.get("q", 0)
        lhs = l1 * a1 * la + l3 * a2 * lb
        rhs = alpha * (l1 * la + l3 * lb)
        assert lhs >= rhs - 1e-9 * max(1.0, rhs)


def test_lower_h_linear_range(p0):
    with pytest.raises(OutOfRange):
        build_aux(p0, "lower_H_linear", alpha=0.3)


def test_upper_p_curved_constants(p0):
    alpha = 0.95
    aux = build_aux(p0, "upper_P_curved", alpha=alpha)
    f2 = BetaFunction.from_base(2.2, 0.45)
    lm = landmarks(p0)
    assert aux.constants["alpha0"] == pytest.approx(min(alpha, lm.c2))
    assert beta_prime(f2, aux.constants["s"]) == pytest.approx(alpha, abs=1e-12)
    assert aux.constants["s0"] == 0.0


def test_upper_p_linear(p0):
    aux = build_aux(p0, "upper_P_linear", alpha_p=0.80)
    ext = strong_law_extremes(p0, aux)
    assert ext.limsup == pytest.approx(0.80, abs=5e-3)


def test_geometric_cut():
    assert geometric_cut(16, 512) == 90
    assert geometric_cut(0, 2) == 1
    assert geometric_cut(2 ** 36, 2 ** 49) == math.isqrt(2 ** 85)


def test_unknown_target(p0):
    with pytest.raises(ValueError, match="unknown auxiliary target"):
        build_aux(p0, "nope")
    with pytest.raises(ValueError, match="alpha is required"):
        build_aux(p0, "lower_H")


@pytest.mark.parametrize("kind,alpha,alpha_p", [
    ("hausdorff", 0.20, 0.85),
    ("hausdorff", 0.25, 0.80),
    ("hausdorff", 0.255, 0.78),
    ("hausdorff", 0.30, 0.95),
    ("packing", 0.22, 0.95),
    ("packing", 0.26, 0.80),
    ("packing", 0.26, 0.95),
    ("packing", 0.30, 0.77),
])
def test_joint_constructions_track_targets(p0, kind, alpha, alpha_p):
    target = "joint_H" if kind == "hausdorff" else "joint_P"
    aux = build_aux(p0, target, alpha=alpha, alpha_p=alpha_p, depth=12)
    ext = strong_law_extremes(p0, aux)
    assert ext.liminf == pytest.approx(alpha, abs=5e-3)
    assert ext.limsup == pytest.approx(alpha_p, abs=5e-3)
    assert dim_joint(p0, alpha, alpha_p, kind)[1] is not None


def test_sample_point_examples():
    ones = AuxSpec((Segment(100, 1.0, "A", "one"),), "dirac")
    assert ones.degenerate
    assert sample_point(ones, 100, 7).sum() == 0
    half = AuxSpec((Segment(10_000, 0.5, "A", "half"),), "half")
    word = sample_point(half, 10_000, 11)
    assert 4700 <= int((word == 0).sum()) <= 5300
    assert np.array_equal(word, sample_point(half, 10_000, 11))
    assert not np.array_equal(word, sample_point(half, 10_000, 12))
    with pytest.raises(ValueError):
        sample_point(half, 2_000_000, 0)


def test_monte_carlo_uniform_is_deterministic(p0):
    aux = build_aux(p0, "uniform", depth=5)
    cps = [p0.schedule.N(i) for i in range(1, 5)]
    res = monte_carlo_local_dims(p0, aux, cps[-1], cps, 20, 0)
    for s in res.summaries:
        assert s.sd_d_muprime == pytest.approx(0.0, abs=1e-12)
        assert s.mean_d_muprime == pytest.approx(s.deterministic_R_prime, rel=1e-9)


def test_monte_carlo_methods_agree(p0):
    aux = build_aux(p0, "mu", depth=4)
    cps = [p0.schedule.N(i) for i in range(1, 5)]
    ex = monte_carlo_local_dims(p0, aux, cps[-1], cps, 400, 5, method="explicit")
    bi = monte_carlo_local_dims(p0, aux, cps[-1], cps, 400, 5, method="binomial")
    for a, b in zip(ex.summaries, bi.summaries):
        se = math.hypot(a.sd_d_mu, b.sd_d_mu) / math.sqrt(400)
        assert abs(a.mean_d_mu - b.mean_d_mu) <= 4 * se + 1e-12


def test_monte_carlo_worker_independent(p0):
    aux = build_aux(p0, "mu", depth=3)
    cps = [p0.schedule.N(i) for i in range(1, 4)]
    one = monte_carlo_local_dims(p0, aux, cps[-1], cps, 6, 9, workers=1)
    two = monte_carlo_local_dims(p0, aux, cps[-1], cps, 6, 9, workers=2)
    assert np.array_equal(one.d_mu, two.d_mu)


def test_monte_carlo_deep_binomial(p0):
    aux = build_aux(p0, "mu", depth=7)
    cps = [p0.schedule.N(i) for i in range(5, 8)]
    res = monte_carlo_local_dims(p0, aux, cps[-1], cps, 200, 1)
    assert res.method == "binomial"
    last = res.summaries[-1]
    assert abs(last.mean_d_mu - last.deterministic_R) <= 3 * last.sd_d_mu / math.sqrt(200) + 1e-12


def test_monte_carlo_depth_cap(p0):
    aux = build_aux(p0, "mu", depth=8)
    n8 = p0.schedule.N(8)
    with pytest.raises(ValueError, match="2\\*\\*62"):
        monte_carlo_local_dims(p0, aux, n8, [n8], 2, 0)
    with pytest.raises(ValueError):
        monte_carlo_local_dims(p0, aux, 100, [200], 2, 0)
