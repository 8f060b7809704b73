import numpy as np
import pytest

from oracles import Constant, cond_posterior_mean
from wavediff.conditional import (ScheduleError, cond_forward, cond_reverse_step, cond_sample,
                                  cond_training_loss, cond_training_target, interpolation_schedule,
                                  reverse_coefficients)
from wavediff.denoiser import ConditionalGaussianOracle, GaussianOracleDenoiser
from wavediff.diffusion import linear_schedule, reverse_step, sample

S = linear_schedule(50)
CS = interpolation_schedule(S)
ZERO = interpolation_schedule(S, "zero")


def test_zero_schedule_delta_is_unconditional_variance():
    np.testing.assert_array_equal(ZERO.delta[1:], 1 - S.alpha_bar[1:])
    assert ZERO.is_unconditional


def test_default_schedule_endpoints_and_scan():
    assert CS.m[0] == 0 and CS.m[50] == 1
    assert np.all(np.diff(CS.m) >= 0)
    assert CS.delta[50] == pytest.approx(1 - 2 * S.alpha_bar[50], abs=1e-15)
    assert np.all(CS.delta[1:] >= 0)
    for t in range(1, 51):
        assert CS.transition(t)[2] >= 0


def test_linear_m_is_rejected_on_default_betas():
    with pytest.raises(ScheduleError, match="t=1"):
        interpolation_schedule(S, "linear")


def test_linear_m_accepted_where_valid():
    # larger early betas leave room for m_t = t / T
    cs = interpolation_schedule(linear_schedule(20, 0.05, 0.3), "linear")
    assert cs.m[20] == 1.0


@pytest.mark.parametrize("m, match", [
    (np.r_[0.0, 0.5, 0.4, np.ones(48)], "monotone"),
    (np.r_[0.1, np.linspace(0.1, 1, 50)], "m\\[0\\]"),
    (np.r_[0.0, np.linspace(0.0, 0.9, 50)], "m\\[T\\]"),
    (np.zeros(10), "length"),
])
def test_invalid_m_specs(m, match):
    with pytest.raises(ScheduleError, match=match):
        interpolation_schedule(S, m)


def test_unknown_schedule_name():
    with pytest.raises(ScheduleError):
        interpolation_schedule(S, "cosine")


def test_cond_forward_cases(rng):
    y0, yn = rng.standard_normal((2, 2, 8))
    z = np.zeros_like(y0)
    t_zero = 1
    cs0 = interpolation_schedule(S, "zero")
    np.testing.assert_array_equal(cond_forward(y0, yn, t_zero, z, cs0), np.sqrt(S.alpha_bar[1]) * y0)
    np.testing.assert_allclose(cond_forward(y0, yn, 50, z, CS), np.sqrt(S.alpha_bar[50]) * yn, atol=1e-15)
    for t in (5, 30):
        np.testing.assert_allclose(cond_forward(y0, y0, t, z, CS), np.sqrt(S.alpha_bar[t]) * y0, atol=1e-15)
    with pytest.raises(ValueError):
        cond_forward(y0, yn[:, :3], 5, z, CS)


def test_endpoint_anchoring_in_distribution():
    rng = np.random.default_rng(1)
    y0, yn = np.array([0.4]), np.array([-0.7])
    eps = rng.standard_normal((20_000, 1))
    y = cond_forward(np.broadcast_to(y0, eps.shape), np.broadcast_to(yn, eps.shape), 50, eps, CS)
    se = np.sqrt(CS.delta[50] / eps.size)
    assert abs(y.mean() - np.sqrt(S.alpha_bar[50]) * yn[0]) < 3 * se


def test_training_target(rng):
    y0, yn, eps = rng.standard_normal((3, 2, 8))
    np.testing.assert_allclose(cond_training_target(y0, yn, 7, eps, ZERO), eps, rtol=1e-15)
    np.testing.assert_array_equal(cond_training_target(y0, y0, 7, np.zeros_like(y0), CS), 0)
    t = 23
    ab, m, d = S.alpha_bar[t], CS.m[t], CS.delta[t]
    want = (m * np.sqrt(ab) * (yn - y0) + np.sqrt(d) * eps) / np.sqrt(1 - ab)
    np.testing.assert_allclose(cond_training_target(y0, yn, t, eps, CS), want, rtol=1e-14)


def test_training_target_is_combined_noise(rng):
    # y_t = sqrt(abar) y0 + sqrt(1 - abar) * target
    y0, yn, eps = rng.standard_normal((3, 2, 8))
    t = 31
    yt = cond_forward(y0, yn, t, eps, CS)
    tgt = cond_training_target(y0, yn, t, eps, CS)
    np.testing.assert_allclose(yt, np.sqrt(S.alpha_bar[t]) * y0 + np.sqrt(1 - S.alpha_bar[t]) * tgt, atol=1e-14)


def test_cond_training_loss_zero_for_exact_predictor(rng):
    y0, yn, eps = rng.standard_normal((3, 2, 8))
    tgt = cond_training_target(y0, yn, 12, eps, CS)
    assert cond_training_loss(Constant(tgt), y0, yn, 12, eps, CS) == 0.0


def test_zero_schedule_gives_unconditional_coefficients():
    for t in range(1, 51):
        c = reverse_coefficients(t, ZERO)
        c_y, c_eps = S.reverse_coefficients(t)
        assert (c.c_yt, c.c_yn, c.c_eps) == (c_y, 0.0, c_eps)


def test_bayes_consistency_against_joint_gaussian():
    rng = np.random.default_rng(2024)
    ab = S.alpha_bar
    worst = 0.0
    for _ in range(100):
        y0, yn, e = rng.standard_normal(3)
        for t in range(1, 51):
            yt = float(cond_forward(np.array(y0), np.array(yn), t, np.array(e), CS))
            eps_c = (yt - np.sqrt(ab[t]) * y0) / np.sqrt(1 - ab[t])
            c = reverse_coefficients(t, CS)
            got = c.c_yt * yt + c.c_yn * yn - c.c_eps * eps_c
            want = float(cond_posterior_mean(y0, yn, yt, t, ab, CS.m))
            worst = max(worst, abs(got - want))
    assert worst < 1e-8


def test_coefficients_match_closed_forms():
    # c_yt and c_eps in their expanded closed forms
    for t in range(2, 51):
        m, mp = CS.m[t], CS.m[t - 1]
        d, dp = CS.delta[t], CS.delta[t - 1]
        a, ab = S.alpha[t], S.alpha_bar[t]
        dtt = CS.transition(t)[2]
        c = reverse_coefficients(t, CS)
        c_yt = (1 - m) / (1 - mp) * dp / d * np.sqrt(a) + (1 - mp) * dtt / d / np.sqrt(a)
        c_eps = (1 - mp) / d * dtt * np.sqrt(1 - ab) / np.sqrt(a)
        assert c.c_yt == pytest.approx(c_yt, rel=1e-12)
        assert c.c_eps == pytest.approx(c_eps, rel=1e-12)
        assert 0 < c.delta_cond <= d


def test_coefficient_scan_has_no_sign_flips():
    cy = np.array([reverse_coefficients(t, CS).c_yt for t in range(1, 51)])
    assert np.all(np.isfinite(cy)) and np.all(cy > 0)


def test_reverse_coefficients_range():
    with pytest.raises(ValueError):
        reverse_coefficients(0, CS)
    with pytest.raises(ValueError):
        reverse_coefficients(51, CS)


def test_reverse_step_with_exact_noise_hits_posterior_mean():
    y0, yn = np.array([[0.3, -0.2]]), np.array([[0.9, 0.1]])
    t = 17
    eps = np.array([[0.5, -1.1]])
    yt = cond_forward(y0, yn, t, eps, CS)
    exact = Constant(cond_training_target(y0, yn, t, eps, CS))
    out = np.mean([cond_reverse_step(exact, yt, yn, t, CS, np.random.default_rng(s)) for s in range(4000)], axis=0)
    want = np.array([[float(cond_posterior_mean(y0[0, i], yn[0, i], yt[0, i], t, S.alpha_bar, CS.m))
                      for i in range(2)]])
    c = reverse_coefficients(t, CS)
    mean = c.c_yt * yt + c.c_yn * yn - c.c_eps * exact.value
    np.testing.assert_allclose(mean, want, atol=1e-8)
    np.testing.assert_allclose(out, want, atol=4 * np.sqrt(c.delta_cond / 4000))


def test_zero_schedule_step_is_bitwise_unconditional(rng):
    y = rng.standard_normal((2, 16))
    yn = rng.standard_normal((2, 16))
    d = Constant(rng.standard_normal((2, 16)))
    for t in (1, 2, 25, 50):
        a = cond_reverse_step(d, y, yn, t, ZERO, np.random.default_rng(t))
        b = reverse_step(d, y, t, S, np.random.default_rng(t))
        np.testing.assert_array_equal(a, b)


def test_zero_schedule_chain_is_bitwise_unconditional():
    o = GaussianOracleDenoiser(0.1, 0.4, S)
    init = np.random.default_rng(0).standard_normal((2, 32))
    a = cond_sample(o, np.zeros((2, 32)), ZERO, np.random.default_rng(5), init=init)
    b = sample(o, (2, 32), S, np.random.default_rng(5), init=init)
    np.testing.assert_array_equal(a, b)


def test_zero_schedule_sampling_matches_unconditional_statistics():
    o = GaussianOracleDenoiser(0.2, 0.5, S)
    a = cond_sample(o, np.zeros((8000, 1)), ZERO, np.random.default_rng(1))
    b = sample(o, (8000, 1), S, np.random.default_rng(2))
    se = np.sqrt(2 * 0.5 / 8000)
    assert abs(a.mean() - b.mean()) < 4 * se
    assert a.std() == pytest.approx(b.std(), rel=0.05)


def test_final_step_is_deterministic(rng):
    y, yn = rng.standard_normal((2, 2, 4))
    d = Constant(0.2)
    a = cond_reverse_step(d, y, yn, 1, CS, np.random.default_rng(0))
    b = cond_reverse_step(d, y, yn, 1, CS, np.random.default_rng(1))
    np.testing.assert_array_equal(a, b)


def test_cond_sample_determinism():
    oracle = ConditionalGaussianOracle(0.0, 1.0, 0.5, CS)
    yn = np.random.default_rng(0).standard_normal((2, 8))
    a = cond_sample(oracle, yn, CS, np.random.default_rng(4))
    b = cond_sample(oracle, yn, CS, np.random.default_rng(4))
    np.testing.assert_array_equal(a, b)


def test_oracle_enhancement_beats_noisy_input():
    # one posterior draw has twice the posterior variance as MSE, so the
    # posterior mean is estimated by averaging 16 draws per trial
    rng = np.random.default_rng(11)
    noise_var = 0.5
    oracle = ConditionalGaussianOracle(0.0, 1.0, noise_var, CS)
    y0 = rng.standard_normal((1000, 1))
    yn = y0 + np.sqrt(noise_var) * rng.standard_normal((1000, 1))
    draws = cond_sample(oracle, np.broadcast_to(yn, (16, 1000, 1)).copy(), CS, rng)
    mse_out = np.mean((draws.mean(axis=0) - y0) ** 2)
    mse_in = np.mean((yn - y0) ** 2)
    assert mse_out < mse_in
    assert mse_out < 0.8 * mse_in


def test_conditional_oracle_is_exact_posterior_noise():
    # brute force: E[eps_c | y_t, yn] from the 3-variable joint Gaussian
    mu, c, nv = 0.3, 0.8, 0.4
    oracle = ConditionalGaussianOracle(mu, c, nv, CS)
    t = 20
    ab, m, d = S.alpha_bar[t], CS.m[t], CS.delta[t]
    # variables (y0, n, e); yn = y0 + n, y_t = sqrt(ab)((1-m) y0 + m yn) + sqrt(d) e
    cov = np.diag([c, nv, 1.0])
    Yt = np.array([np.sqrt(ab), np.sqrt(ab) * m, np.sqrt(d)])
    Yn = np.array([1.0, 1.0, 0.0])
    Ec = (Yt - np.sqrt(ab) * np.array([1.0, 0, 0])) / np.sqrt(1 - ab)
    mean = np.array([mu, 0.0, 0.0])
    obs = np.vstack([Yt, Yn])
    S_oo = obs @ cov @ obs.T
    S_eo = Ec @ cov @ obs.T
    for yt, yn in [(0.1, 0.2), (-1.0, 0.7), (2.0, -0.5)]:
        resid = np.array([yt, yn]) - obs @ mean
        want = Ec @ mean + S_eo @ np.linalg.solve(S_oo, resid)
        assert oracle.predict(np.array([yt]), t, np.array([yn]))[0] == pytest.approx(want, abs=1e-12)


def test_short_schedule_cannot_reach_m_one():
    with pytest.raises(ScheduleError, match="alpha_bar_T"):
        interpolation_schedule(linear_schedule(5), "snr")
    assert interpolation_schedule(linear_schedule(5, 1e-4, 0.5), "snr").delta[5] >= 0
