import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trainfb import gaps, montecarlo as mc
from trainfb.core import (BadTrialCount, BitBudgetTooLarge, BudgetTooSmall, ResourceSplit,
                          SchemeSpec, SingularChannel, SystemConfig)

CFG = SystemConfig(4, 10.0, 1000)


def mean_and_se(x):
    x = np.asarray(x, dtype=float).ravel()
    return x.mean(), x.std(ddof=1) / math.sqrt(x.size)


def test_channel_is_deterministic():
    a = mc.draw_channel(123, CFG).h
    b = mc.draw_channel(123, CFG).h
    assert np.array_equal(a, b)
    assert not np.array_equal(a, mc.draw_channel(124, CFG).h)


def test_channel_moments():
    h = mc.draw_channel(5, CFG, 62_500).h  # 10**6 coefficients
    assert np.all(np.isfinite(h))
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.01)
    assert np.var(h.real) == pytest.approx(0.5, abs=0.01)
    assert np.var(h.imag) == pytest.approx(0.5, abs=0.01)


def test_training_error_variance_and_orthogonality():
    block = mc.draw_channel(1, CFG, 62_500)
    est = mc.ut_train_estimate(block, 4, CFG, np.random.default_rng(2))
    err = block.h - est.h_hat_ut
    m, se = mean_and_se(np.abs(err) ** 2)
    assert abs(m - 1 / 11) <= 3 * se
    assert est.error_var_ut == pytest.approx(1 / 11)
    cross = (est.h_hat_ut * np.conj(err)).ravel()
    for part in (cross.real, cross.imag):
        cm, cse = mean_and_se(part)
        assert abs(cm) <= 3 * cse


def test_training_is_exact_at_huge_snr():
    cfg = SystemConfig(4, 120.0, 1000)
    block = mc.draw_channel(3, cfg, 100)
    est = mc.ut_train_estimate(block, 4, cfg, 4)
    assert np.max(np.abs(est.h_hat_ut - block.h)) < 1e-5


def test_analog_feedback_noise_variance():
    h_hat = mc.complex_normal(np.random.default_rng(0), (50_000, 4, 4))
    for t_fb in (16, 32, 160):
        if CFG.rho * t_fb / 16 < 10:
            continue
        y = mc.analog_feedback_observation(h_hat, t_fb, CFG, np.random.default_rng(t_fb))
        var = np.mean(np.abs(y - h_hat) ** 2)
        assert var == pytest.approx(16 / (CFG.rho * t_fb), rel=0.05)


def test_analog_feedback_limit_and_minimum():
    block = mc.draw_channel(9, CFG, 10)
    est = mc.ut_train_estimate(block, 16, CFG, 1)
    bs = mc.analog_feedback(est, 1e13, CFG, 2)
    assert np.max(np.abs(bs.h_hat_bs - est.h_hat_ut)) < 1e-5
    with pytest.raises(BudgetTooSmall):
        mc.analog_feedback(est, 15, CFG, 2)


def test_rvq_injected_codeword_is_exact():
    block = mc.draw_channel(4, CFG)
    est = mc.ut_train_estimate(block, 16, CFG, 5)
    u = est.h_hat_ut[:, 0] / np.linalg.norm(est.h_hat_ut[:, 0])
    rng = np.random.default_rng(6)
    cb = mc.random_unit_vectors(rng, (31,), 4)
    cb = np.vstack([cb, u * np.exp(0.7j)])
    q = mc.rvq_quantize(est, 5, CFG, rng, codebook=cb)
    assert mc.sin2_angle(est.h_hat_ut, q.h_hat_bs)[0] == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("method", ["codebook", "sampled"])
def test_rvq_unit_norm_and_zero_bits(method):
    block = mc.draw_channel(8, CFG, 20_000)
    est = mc.ut_train_estimate(block, 16, CFG, 9)
    fn = mc.rvq_quantize if method == "codebook" else mc.rvq_quantize_sampled
    q = fn(est, 0, CFG, np.random.default_rng(10))
    assert np.allclose(np.linalg.norm(q.h_hat_bs, axis=-2), 1.0)
    m, se = mean_and_se(mc.sin2_angle(est.h_hat_ut, q.h_hat_bs))
    assert abs(m - 0.75) <= 3 * se


@pytest.mark.parametrize("method", ["codebook", "sampled"])
def test_rvq_distortion_b10(method):
    block = mc.draw_channel(11, CFG, 5000 if method == "codebook" else 50_000)
    est = mc.ut_train_estimate(block, 16, CFG, 12)
    fn = mc.rvq_quantize if method == "codebook" else mc.rvq_quantize_sampled
    q = fn(est, 10, CFG, np.random.default_rng(13))
    m, se = mean_and_se(mc.sin2_angle(est.h_hat_ut, q.h_hat_bs))
    assert m <= 2 ** (-10 / 3) + 3 * se


def test_rvq_sampled_matches_codebook_law():
    # same distribution of sin^2 from both quantizers (two-sample mean check)
    block = mc.draw_channel(14, CFG, 5000)
    est = mc.ut_train_estimate(block, 16, CFG, 15)
    a = mc.sin2_angle(est.h_hat_ut, mc.rvq_quantize(est, 8, CFG, 16).h_hat_bs)
    b = mc.sin2_angle(est.h_hat_ut, mc.rvq_quantize_sampled(est, 8, CFG, 17).h_hat_bs)
    ma, sa = mean_and_se(a)
    mb, sb = mean_and_se(b)
    assert abs(ma - mb) <= 4 * math.hypot(sa, sb)


def test_rvq_bit_cap():
    est = mc.ut_train_estimate(mc.draw_channel(1, CFG), 4, CFG, 1)
    with pytest.raises(BitBudgetTooLarge):
        mc.rvq_quantize(est, 25, CFG, 1)


def test_zf_orthogonal_case():
    cfg = SystemConfig(2, 10.0, 100)
    h = np.array([[1.0, 1.0], [1.0j, -1.0j]]) / math.sqrt(2)
    v = mc.zf_beamformers(h).v
    for k in range(2):
        overlap = abs(np.vdot(h[:, k], v[:, k]))
        assert overlap == pytest.approx(1.0)
    assert mc.trial_outcome(h, v, cfg).interference == pytest.approx([0, 0], abs=1e-14)


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([2, 3, 4, 8]))
def test_zf_invariants(seed, n):
    cfg = SystemConfig(n, 10.0, 100)
    h = mc.draw_channel(seed, cfg).h
    bs = mc.zf_beamformers(h)
    if not bs.valid:
        return
    assert np.allclose(np.linalg.norm(bs.v, axis=0), 1.0, atol=1e-9)
    g = np.abs(h.conj().T @ bs.v)
    assert np.all(g[~np.eye(n, dtype=bool)] <= 1e-8 * max(1.0, np.abs(h).max()))
    out = mc.trial_outcome(h, bs.v, cfg)
    assert np.all(out.sinr >= 0) and np.all(out.interference >= -1e-12)


def test_zf_flags_singular_estimates():
    h = np.ones((4, 4), dtype=complex)
    assert not mc.zf_beamformers(h).valid


@pytest.mark.slow
def test_perfect_csi_rate_matches_closed_form():
    rates = []
    for i in range(10):
        h = mc.draw_channel(100 + i, CFG, 100_000).h
        rates.append(mc.trial_outcome(h, mc.zf_beamformers(h).v, CFG).rate_bits.mean(-1))
    m, se = mean_and_se(np.concatenate(rates))
    assert abs(m - gaps.zf_rate(CFG)) <= 3 * se


def test_campaign_rejects_zero_trials():
    with pytest.raises(BadTrialCount):
        mc.run_campaign(CFG, SchemeSpec.build("tdd", 4), ResourceSplit(50, 0), 0, 1)


def test_campaign_is_deterministic_across_workers():
    scheme = SchemeSpec.build("digital-errorfree", 4)
    split = ResourceSplit(40, 40)
    a = mc.run_campaign(CFG, scheme, split, 20_000, 3, chunk_size=3000, workers=1)
    b = mc.run_campaign(CFG, scheme, split, 20_000, 3, chunk_size=3000, workers=4)
    assert (a.mean_rate_bits, a.stderr_bits) == (b.mean_rate_bits, b.stderr_bits)
    c = mc.run_campaign(CFG, scheme, split, 20_000, 4, chunk_size=3000)
    assert c.mean_rate_bits != a.mean_rate_bits


def test_campaign_fails_when_blocks_are_singular(monkeypatch):
    def broken(h):
        valid = np.zeros(h.shape[0], dtype=bool)
        valid[::2] = True
        v = np.broadcast_to(np.eye(h.shape[-1], dtype=complex), h.shape)
        return mc.BeamformerSet(v, valid)
    monkeypatch.setattr(mc, "zf_beamformers", broken)
    with pytest.raises(SingularChannel):
        mc.run_campaign(CFG, SchemeSpec.build("tdd", 4), ResourceSplit(50, 0), 1000, 1)


@pytest.mark.slow
def test_campaign_analog_bound_16_32():
    res = mc.run_campaign(CFG, SchemeSpec.build("analog", 4), ResourceSplit(16, 32), 100_000, 21)
    assert res.trials == 100_000 and res.bound_holds
    assert res.bound_bits == pytest.approx(
        gaps.zf_rate(CFG) - math.log2(1 + 3 / 16 + 12 / 32))


@pytest.mark.slow
def test_campaign_digital_b15():
    res = mc.run_campaign(CFG, SchemeSpec.build("digital-errorfree", 4), ResourceSplit(16, 40),
                          100_000, 22, bits_b=15)
    assert res.bits_b == 15 and res.bound_holds


def test_campaign_qam_bound_includes_feedback_errors():
    scheme = SchemeSpec.build("digital-qam", 4)
    res = mc.run_campaign(CFG, scheme, ResourceSplit(50, 60), 10_000, 5, constellation_m=4)
    assert res.bits_b == 30 and res.pe_fb > 0
    assert res.bound_holds
