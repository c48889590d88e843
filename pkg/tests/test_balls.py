import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confball.balls import (
    KEPT_BLOCK_FACTOR,
    ConfidenceBall,
    adaptive_ball,
    ball_contains,
    c_alpha,
    c_alpha_terms,
    cutoff_levels,
    deterministic_factor,
    honest_ball,
    single_level_ball,
    usual_ball,
)
from confball.numerics import LAMBDA_STAR
from confball.sequence import BesovBody, CoefficientVector, make_rng


def mp_z(upper):
    """Upper ``upper`` point of the standard normal, by mpmath root finding."""
    return float(mpmath.findroot(lambda x: mpmath.ncdf(x) - (1 - mpmath.mpf(upper)), 1.5))


def ref_level_terms(values, n):
    """Dropped-energy positive part and kept count for one level, coordinate loops."""
    L = max(1, math.ceil(math.log(n)))
    dropped, kept = [], 0
    for start in range(0, len(values), L):
        block = values[start : start + L]
        s2 = sum(x * x for x in block)
        if s2 >= LAMBDA_STAR * len(block) / n:
            kept += len(block)
        else:
            dropped.append(s2 - len(block) / n)
    return max(0.0, math.fsum(dropped)), kept


def ref_det_factor(alpha):
    return 2 * math.sqrt(math.log(2 / alpha)) + 4 * math.sqrt(LAMBDA_STAR) * mp_z(alpha / 2)


def ref_adaptive_radius_sq(y, n, alpha, beta, M, J1, J2):
    z = mp_z(alpha / 4)
    g = 1 - 2 ** (-2 * beta)
    Mn = M ** (1 / (1 + 2 * beta) - 2 / (1 + 4 * beta)) * n ** (1 / (2 + 4 * beta) - 1 / (1 + 4 * beta))
    a = [
        2 ** (2 * beta) / g,
        z * 2**2.5 * math.sqrt(LAMBDA_STAR) * g ** (1 / (2 + 4 * beta)) * Mn,
        2 * math.sqrt(math.log(4 / alpha)) * Mn,
        z * 2 ** (beta + 1) / math.sqrt(g) * Mn,
        2 * math.sqrt(math.log(4 / alpha)),
    ]
    parts = [sum(a) * M ** (2 / (1 + 4 * beta)) * n ** (-4 * beta / (1 + 4 * beta))]
    kept = 0
    # Reverse level order: a different summation path from the library.
    for j in reversed(range(J1)):
        d, k = ref_level_terms(list(y.level(j)), n)
        parts.append(d)
        kept += k
    parts.append((2 * LAMBDA_STAR + 8 * math.sqrt(LAMBDA_STAR) - 1) * kept / n)
    for j in reversed(range(J1, J2)):
        parts.extend(x * x - 1 / n for x in y.level(j))
    return math.fsum(parts)


# Usual ball.

def test_usual_ball_closed_form_two_dof():
    b = usual_ball([0.1, -0.2], 50, 0.05)
    assert b.radius_sq == pytest.approx(-2 * math.log(0.05) / 50, rel=1e-12)
    assert b.center.tolist() == [0.1, -0.2]


def test_usual_ball_chi2_quantile_oracle():
    oracle = float(mpmath.findroot(lambda x: mpmath.gammainc(4, 0, x / 2, regularized=True) - mpmath.mpf("0.9"), (5, 25), solver="bisect"))
    assert usual_ball(np.zeros(8), 100, 0.1).radius_sq == pytest.approx(oracle / 100, rel=1e-9)


def test_usual_ball_rejects_non_dyadic_length():
    with pytest.raises(ValueError):
        usual_ball(np.zeros(3), 10, 0.1)


# Single-level ball.

def test_deterministic_factor_frozen_value():
    assert deterministic_factor(0.05) == pytest.approx(ref_det_factor(0.05), rel=1e-12)
    assert deterministic_factor(0.05) == pytest.approx(24.49, abs=0.005)


@pytest.mark.parametrize("alpha, j, n", [(0.05, 8, 1024), (0.1, 4, 64), (0.2, 10, 100)])
def test_single_level_ball_at_zero(alpha, j, n):
    b = single_level_ball(CoefficientVector.zeros(j + 1), j, n, alpha)
    assert b.kind == "single_level"
    assert b.radius_sq_terms["dropped_energy"] == 0.0
    assert b.radius_sq_terms["kept_blocks"] == 0.0
    assert b.radius_sq == pytest.approx(ref_det_factor(alpha) * 2 ** (j / 2) / n, rel=1e-12)


def test_single_level_ball_all_blocks_kept():
    j, n = 6, 100
    y = CoefficientVector(j + 1, np.full(2 ** (j + 1) - 1, 5.0))
    b = single_level_ball(y, j, n, 0.1)
    assert b.radius_sq_terms["dropped_energy"] == 0.0
    assert b.radius_sq_terms["kept_blocks"] == pytest.approx(KEPT_BLOCK_FACTOR * 2**j / n)
    assert KEPT_BLOCK_FACTOR == pytest.approx(2 * LAMBDA_STAR + 8 * math.sqrt(LAMBDA_STAR) - 1)
    assert np.array_equal(b.center, y.level(j))


@settings(max_examples=40)
@given(st.integers(3, 9), st.integers(23, 3000), st.floats(0.01, 0.5), st.integers(0, 2**32), st.floats(0.5, 4))
def test_single_level_ball_matches_reference(j, n, alpha, seed, scale):
    y = CoefficientVector(j + 1, make_rng(seed).standard_normal(2 ** (j + 1) - 1) * scale / math.sqrt(n))
    L = max(1, math.ceil(math.log(n)))
    b = single_level_ball(y, j, n, alpha)
    if 2**j < L:
        assert b.kind == "usual"
        return
    d, k = ref_level_terms(list(y.level(j)), n)
    expected = math.fsum([ref_det_factor(alpha) * 2 ** (j / 2) / n, d, KEPT_BLOCK_FACTOR * k / n])
    assert b.radius_sq == pytest.approx(expected, rel=1e-10)


def test_single_level_ball_falls_back_on_narrow_levels():
    y = CoefficientVector(3, [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])
    b = single_level_ball(y, 1, 1000, 0.1)
    assert b.kind == "usual"
    assert b == b and b.radius_sq == usual_ball(y.level(1), 1000, 0.1).radius_sq


def test_single_level_ball_rejects_too_fine_level():
    with pytest.raises(ValueError):
        single_level_ball(CoefficientVector.zeros(8), 7, 10, 0.1)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1])
def test_single_level_ball_rejects_alpha(alpha):
    with pytest.raises(ValueError):
        single_level_ball(CoefficientVector.zeros(5), 4, 100, alpha)


# Cutoffs and c_alpha.

def test_cutoff_levels_worked_example():
    assert cutoff_levels(12, 2**10, 0.5, 1.0) == cutoff_levels(12, 1024, 0.5, 1.0)
    cut = cutoff_levels(12, 1024, 0.5, 1.0)
    assert (cut.J1, cut.J2) == (5, 6)


def test_cutoff_levels_inactive_caps():
    cut = cutoff_levels(4, 1024, 0.5, 1.0)
    assert (cut.J1, cut.J2) == (4, 4)


def test_cutoff_levels_small_radius():
    cut = cutoff_levels(10, 1024, 0.5, 1e-6)
    assert cut.J1 == 0
    assert cut.J2 >= cut.J1


@given(st.integers(1, 16), st.integers(2, 10**6), st.floats(0.05, 4), st.floats(0.01, 100))
def test_cutoff_levels_respect_caps(J, n, beta, M):
    cut = cutoff_levels(J, n, beta, M)
    assert 0 <= cut.J1 <= cut.J2 <= J
    cap1 = M ** (2 / (1 + 2 * beta)) * n ** (1 / (1 + 2 * beta))
    if 0 < cut.J1 < J:
        assert 2**cut.J1 <= cap1 * (1 + 1e-9)
        assert 2 ** (cut.J1 + 1) > cap1 * (1 - 1e-9) or cut.J1 == 0


def test_c_alpha_frozen_value():
    terms = c_alpha_terms(0.05, 0.5, 1.0, 1024)
    z = mp_z(0.0125)
    F = 1024 ** (1 / 4 - 1 / 3)
    assert terms["a0"] == pytest.approx(4.0)
    assert terms["a4"] == pytest.approx(2 * math.sqrt(math.log(80)))
    assert terms["a1"] == pytest.approx(z * 2**2.5 * math.sqrt(LAMBDA_STAR) * 0.5**0.25 * F, rel=1e-12)
    assert terms["a3"] == pytest.approx(z * 4 * F, rel=1e-12)
    assert c_alpha(0.05, 0.5, 1.0, 1024) == pytest.approx(31.32826163658065, rel=1e-12)


def test_c_alpha_vanishing_terms_decrease_in_n():
    vanishing = [sum(c_alpha_terms(0.1, 0.5, 1.0, n)[k] for k in ("a1", "a2", "a3")) for n in (2**8, 2**16, 2**32, 2**64)]
    assert all(b < a for a, b in zip(vanishing, vanishing[1:]))
    assert vanishing[-1] < 0.05 * vanishing[0]


def test_c_alpha_needs_alpha_below_half():
    with pytest.raises(ValueError):
        c_alpha(0.6, 0.5, 1.0, 100)


# Adaptive and honest balls.

def test_adaptive_ball_at_zero():
    body = BesovBody(0.5, M=1.0)
    J, n = 12, 1024
    b = adaptive_ball(CoefficientVector.zeros(J), n, 0.05, body)
    J1, J2 = b.params["J1"], b.params["J2"]
    expected = c_alpha(0.05, 0.5, 1.0, n) * n ** (-2 / 3) - (2**J2 - 2**J1) / n
    assert b.radius_sq == pytest.approx(expected, rel=1e-12)
    assert b.radius_sq_terms["dropped_energy"] == 0.0


def test_adaptive_ball_without_tail_band():
    b = adaptive_ball(CoefficientVector.zeros(4), 1024, 0.1, BesovBody(0.5))
    assert b.params["J1"] == b.params["J2"] == 4
    assert b.radius_sq_terms["unbiased_tail"] == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(6, 12), st.integers(64, 8192), st.floats(0.02, 0.45), st.floats(0.3, 2.0), st.floats(0.2, 5.0), st.integers(0, 2**32))
def test_adaptive_ball_matches_reference(J, n, alpha, beta, M, seed):
    rng = make_rng(seed)
    y = CoefficientVector(J, rng.standard_normal(2**J - 1) / math.sqrt(n) + rng.standard_normal(2**J - 1) * 0.05 * 2.0 ** -np.repeat(np.arange(J), 2 ** np.arange(J)))
    b = adaptive_ball(y, n, alpha, BesovBody(beta, M=M))
    cut = cutoff_levels(J, n, beta, M)
    ref = ref_adaptive_radius_sq(y, n, alpha, beta, M, cut.J1, cut.J2)
    assert b.radius_sq == pytest.approx(ref, rel=1e-10, abs=1e-14)
    assert b.radius == pytest.approx(math.sqrt(max(0.0, ref)), rel=1e-10, abs=1e-12)
    assert not b.center[2**cut.J1 - 1 :].any()


def test_honest_ball_at_zero():
    b = honest_ball(CoefficientVector.zeros(10), 1024, 0.1)
    assert b.radius_sq == pytest.approx(ref_det_factor(0.1) * math.sqrt(1023) / 1024, rel=1e-12)


def test_honest_ball_all_blocks_kept():
    y = CoefficientVector(8, np.full(255, 3.0))
    b = honest_ball(y, 200, 0.1)
    assert b.radius_sq == pytest.approx(ref_det_factor(0.1) * math.sqrt(255) / 200 + KEPT_BLOCK_FACTOR * 255 / 200, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 11), st.integers(50, 5000), st.floats(0.02, 0.45), st.integers(0, 2**32))
def test_honest_ball_matches_reference(J, n, alpha, seed):
    y = CoefficientVector(J, make_rng(seed).standard_normal(2**J - 1) * 2 / math.sqrt(n))
    parts = [ref_det_factor(alpha) * math.sqrt(2**J - 1) / n]
    kept = 0
    for j in reversed(range(J)):
        d, k = ref_level_terms(list(y.level(j)), n)
        parts.append(d)
        kept += k
    parts.append(KEPT_BLOCK_FACTOR * kept / n)
    assert honest_ball(y, n, alpha).radius_sq == pytest.approx(math.fsum(parts), rel=1e-10)


def test_honest_ball_rejects_degenerate_dimension():
    with pytest.raises(ValueError):
        honest_ball(CoefficientVector.zeros(7), 10, 0.1)


# Membership and serialisation.

def test_membership_is_closed_ball():
    b = ConfidenceBall(np.zeros(3), {"r": 4.0}, 0.1, "honest", {"J": 2})
    assert ball_contains(b, CoefficientVector(2, [0, 0, 0]))
    assert b.contains(CoefficientVector(2, [2.0, 0, 0]))
    assert not b.contains(CoefficientVector(2, [2.0 + 1e-9, 0, 0]))
    with pytest.raises(ValueError):
        b.contains(np.zeros(4))


def test_negative_radius_sq_clips_radius():
    b = ConfidenceBall(np.zeros(1), {"a": 1.0, "b": -2.0}, 0.1, "besov_adaptive", {"J": 1})
    assert b.radius_sq == -1.0 and b.radius == 0.0
    assert b.contains(CoefficientVector(1, [0.0]))


def test_level_ball_membership_uses_its_level():
    y = CoefficientVector(5, make_rng(2).standard_normal(31))
    b = single_level_ball(y, 4, 50, 0.1)
    assert b.contains(y.level(4) * 0 + b.center)


@pytest.mark.parametrize("builder", [
    lambda y: usual_ball(y.level(3), 100, 0.1),
    lambda y: single_level_ball(y, 5, 100, 0.1),
    lambda y: adaptive_ball(y, 100, 0.1, BesovBody(0.5)),
    lambda y: honest_ball(y, 100, 0.1),
])
def test_ball_json_round_trip(builder):
    y = CoefficientVector(7, make_rng(4).standard_normal(127) * 0.3)
    b = builder(y)
    s = b.to_json()
    back = ConfidenceBall.from_json(s)
    assert back.to_json() == s
    assert back.radius_sq == b.radius_sq
    assert json.loads(s)["radius"] == b.radius
