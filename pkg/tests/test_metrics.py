import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfprecode.metrics import (
    avg_distortion,
    evaluate_glse,
    papr,
    papr_db,
    rss,
    rzf_precode,
    to_db,
    tune_gamma_for_papr,
    tune_lambda_for_papr,
)
from rfprecode.problem import GlseProblem
from rfprecode.projection import ProjectionConfig
from rfprecode.rf import RfModel
from rfprecode.solver import objective, solve_glse_direct

from conftest import random_problem


def cgauss(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def direct(p):
    return solve_glse_direct(p).w


def test_rss_examples(rng):
    p = random_problem(rng, 8, 5, rho=2.0)
    v = cgauss(rng, 8)
    assert rss(p.H, np.zeros(8), p.s, 2.0) == pytest.approx(2.0 * np.sum(np.abs(p.s) ** 2), rel=1e-14)
    assert rss(p.H, v, p.s, 0.0) == pytest.approx(np.sum(np.abs(p.H.T @ v) ** 2), rel=1e-14)
    assert abs(rss(p.H, v, p.s, p.rho) - (objective(v, p) - p.lam * np.sum(np.abs(v) ** 2))) <= 1e-12
    assert avg_distortion(p.H, v, p.s, p.rho) == pytest.approx(rss(p.H, v, p.s, p.rho) / 5)


def test_rss_zero_iff_exact(rng):
    H = cgauss(rng, 4, 4)
    s = cgauss(rng, 4)
    v = np.linalg.solve(H.T, s)
    assert rss(H, v, s, 1.0) < 1e-20
    assert rss(H, v + 1e-3, s, 1.0) > 0


def test_zero_precoder_is_0db_on_average(rng):
    M, K = 16, 2000
    vals = avg_distortion(np.zeros((M, K)), np.zeros(M), cgauss(rng, K), 1.0)
    assert abs(to_db(vals)) < 0.2


def test_papr_examples(rng):
    assert papr(np.exp(1j * rng.uniform(0, 6, 64))) == pytest.approx(1.0, abs=1e-12)
    w = np.zeros(64, complex)
    w[5] = 0.3j
    assert papr(w) == pytest.approx(64.0)
    assert papr(cgauss(rng, 64)) > 1.0
    with pytest.raises(ValueError):
        papr(np.zeros(4))
    assert papr_db(np.ones(3)) == 0.0


@given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=40))
@settings(max_examples=200, deadline=None)
def test_papr_at_least_one(vals):
    w = np.array(vals)
    if np.mean(np.abs(w) ** 2) < 1e-300:
        return
    assert papr(w) >= 1.0 - 1e-12


def test_d_tilde_equals_d_for_exact_inversion(rng):
    rf = RfModel()
    p = random_problem(rng, 16, 8, lam=0.1, p_out=0.5)
    w = solve_glse_direct(p).w
    rep = evaluate_glse(w, p, rf, ProjectionConfig(theta=0.0))
    assert abs(rep.d_actual - rep.d_predicted) <= 1e-9
    assert rep.feasible and rep.d_predicted >= 0


def test_d_tilde_worse_with_theta(rng):
    rf = RfModel()
    p = random_problem(rng, 16, 8, lam=0.05, p_out=1.0)
    w = solve_glse_direct(p).w
    rep = evaluate_glse(w, p, rf, ProjectionConfig(theta=0.05))
    assert rep.d_actual >= rep.d_predicted


# ---------------------------------------------------------------------------
# RZF


def test_rzf_scalar():
    x = rzf_precode(np.ones((1, 1)), np.ones(1), delta=1.0, gamma=1.0)
    np.testing.assert_allclose(x, [0.5], atol=1e-15)


def test_rzf_large_delta_limit(rng):
    H, s = cgauss(rng, 8, 3), cgauss(rng, 3)
    delta = 1e8
    np.testing.assert_allclose(rzf_precode(H, s, delta, 2.0), 2.0 / delta * (H.conj() @ s), rtol=1e-6)


def test_rzf_right_inverse(rng):
    H, s = cgauss(rng, 12, 5), cgauss(rng, 5)
    x = rzf_precode(H, s, 1e-12, 0.7)
    np.testing.assert_allclose(H.T @ x, 0.7 * s, atol=1e-9)


def test_rzf_rejects_bad_delta(rng):
    with pytest.raises(ValueError):
        rzf_precode(cgauss(rng, 3, 2), cgauss(rng, 2), 0.0)


def test_gamma_tuner_hits_target(rng):
    rf = RfModel()
    H, s = cgauss(rng, 64, 32) / 8, cgauss(rng, 32)
    res = tune_gamma_for_papr(H, s, rf, 0.3, 5.0)
    assert res.reached and abs(res.papr_db - 5.0) <= 0.1
    np.testing.assert_allclose(res.w, rf.true_output(rzf_precode(H, s, 0.3, res.value)))


def test_gamma_small_signal_and_saturation(rng):
    rf = RfModel()
    H, s = cgauss(rng, 64, 32) / 8, cgauss(rng, 32)
    x = rzf_precode(H, s, 0.3, 1.0)
    tiny = 1e-4 / np.abs(x).max()
    assert papr_db(rf.true_output(tiny * x)) == pytest.approx(papr_db(x), abs=1e-4)
    # compression lowers the output PAPR well below its small-signal value
    a_peak = rf.saturation_peak()[0]
    sat = a_peak / np.sqrt(np.mean(np.abs(x) ** 2))
    assert papr_db(rf.true_output(sat * x)) < papr_db(x) - 2.0


def test_gamma_unreachable_flag(rng):
    rf = RfModel()
    H, s = cgauss(rng, 16, 8) / 4, cgauss(rng, 8)
    res = tune_gamma_for_papr(H, s, rf, 0.3, target_db=-1.0)
    assert not res.reached


# ---------------------------------------------------------------------------
# lambda tuner


def test_lambda_tuner_hits_target(rng):
    p = random_problem(rng, 64, 36, p_out=1.0)
    res = tune_lambda_for_papr(p, 5.0, 0.1, solve=direct)
    assert res.reached and abs(papr_db(res.w) - 5.0) <= 0.1
    np.testing.assert_allclose(res.w, direct(p.with_lambda(res.value)))


def test_lambda_tuner_default_uses_amp(rng):
    p = random_problem(rng, 32, 16, p_out=1.0)
    res = tune_lambda_for_papr(p, 5.0, 0.1)
    assert res.reached or abs(res.papr_db - 5.0) < 1.0


def test_lambda_tuner_low_target_goes_to_lower_end(rng):
    p = random_problem(rng, 64, 64, p_out=1.0)
    res = tune_lambda_for_papr(p, 0.0, 0.1, solve=direct)
    assert res.value == pytest.approx(1e-4, rel=1e-9)
    assert not res.reached


def test_lambda_tuner_picks_smallest_crossing(rng):
    # every lam above the returned one has no smaller distortion
    p = random_problem(rng, 64, 36, p_out=1.0)
    res = tune_lambda_for_papr(p, 5.0, 0.1, solve=direct)
    d = avg_distortion(p.H, res.w, p.s, p.rho)
    for lam in np.logspace(math.log10(res.value), 2, 8)[1:]:
        assert avg_distortion(p.H, direct(p.with_lambda(lam)), p.s, p.rho) >= d * (1 - 1e-9)


def test_lambda_tuner_ignores_unclipped_branch():
    # clipped branch (lam < 1) stays at 6 dB; the target is only crossed far
    # out on the unclipped plateau, which must not be selected
    def fake(problem):
        lam = problem.lam
        w = np.full(64, 0.5, complex)
        w[0] = 1.0
        if lam >= 1.0:
            w = w * 0.5 / lam
        if lam >= 10.0:
            w[:3] *= 4.0
        return w

    p = GlseProblem(np.ones((64, 4)), np.ones(4), lam=0.1, p_out=1.0)
    res = tune_lambda_for_papr(p, 8.0, 0.1, solve=fake)
    assert papr_db(fake(p.with_lambda(20.0))) > 8.0
    assert res.value <= 1.0 + 1e-9 and not res.reached


def test_lambda_tuner_deterministic(rng):
    p = random_problem(rng, 32, 20, p_out=1.0)
    a = tune_lambda_for_papr(p, 5.0, 0.1, solve=direct)
    b = tune_lambda_for_papr(p, 5.0, 0.1, solve=direct)
    assert a.value == b.value and np.array_equal(a.w, b.w)
