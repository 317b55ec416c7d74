import numpy as np
import pytest
from scipy.special import j0

from embp_pnc.channel import (
    ChannelTrace,
    ClarkeConfig,
    GaussMarkovConfig,
    alpha_from_doppler,
    esn0_to_ebn0,
    gen_clarke,
    gen_gauss_markov,
    gen_trace,
    snr_to_n0,
    transmit,
)
from embp_pnc.txchain import CodeConfig, build_frame_pair, layout_for


def ensemble(gen, cfg, n, seed=0):
    rng = np.random.default_rng(seed)
    return np.array([gen(cfg, rng) for _ in range(n)])  # (n, 2, L)


def lag_corr(h, k):
    return np.mean(h[..., k:] * h[..., : h.shape[-1] - k].conj()).real / np.mean(np.abs(h) ** 2)


@pytest.mark.parametrize("bad", [dict(alpha=0.0), dict(alpha=1.1), dict(var_A=0.0), dict(length=0)])
def test_gauss_markov_config_validation(bad):
    kw = dict(alpha=0.9, length=10) | bad
    with pytest.raises(ValueError):
        GaussMarkovConfig(**kw)


def test_clarke_config_validation():
    with pytest.raises(ValueError):
        ClarkeConfig(0.5, 10)
    with pytest.raises(ValueError):
        ClarkeConfig(0.01, 10, num_scatterers=4)


def test_alpha_one_is_constant():
    h_A, h_B = gen_gauss_markov(GaussMarkovConfig(1.0, 50), np.random.default_rng(0))
    np.testing.assert_allclose(h_A, h_A[0])
    np.testing.assert_allclose(h_B, h_B[0])


def test_gauss_markov_autocorrelation_and_stationarity():
    h = ensemble(gen_gauss_markov, GaussMarkovConfig(0.99, 64), 10_000)
    for k in range(21):
        assert abs(lag_corr(h, k) - 0.99**k) < 0.01
    power = np.mean(np.abs(h) ** 2, axis=0)  # (2, L)
    assert np.all(np.abs(power - 1) < 0.03 + 0.02)
    np.testing.assert_allclose(power.mean(axis=1), 1.0, atol=0.03)


def test_gauss_markov_unequal_powers():
    h = ensemble(gen_gauss_markov, GaussMarkovConfig(0.9, 8, var_A=2.0, var_B=0.5), 5000)
    np.testing.assert_allclose(np.mean(np.abs(h) ** 2, axis=(0, 2)), [2.0, 0.5], rtol=0.05)


def test_gauss_markov_reproducible():
    cfg = GaussMarkovConfig(0.95, 30)
    a = gen_gauss_markov(cfg, np.random.default_rng(5))
    b = gen_gauss_markov(cfg, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


def test_clarke_statistics():
    h = ensemble(gen_clarke, ClarkeConfig(0.005, 32), 10_000)
    assert abs(lag_corr(h, 1) - j0(2 * np.pi * 0.005)) < 0.002
    power = np.mean(np.abs(h) ** 2, axis=(0, 2))
    np.testing.assert_allclose(power, 1.0, rtol=0.05)
    # A and B independent
    cross = np.mean(h[:, 0] * h[:, 1].conj())
    assert abs(cross) < 5 / np.sqrt(h.shape[0] * h.shape[2] / 32)


def test_clarke_longer_lags_follow_bessel():
    h = ensemble(gen_clarke, ClarkeConfig(0.05, 40), 4000)
    for k in (5, 10, 20):
        assert abs(lag_corr(h, k) - j0(2 * np.pi * 0.05 * k)) < 0.03


def test_alpha_mapping():
    assert alpha_from_doppler(0.005) == pytest.approx(j0(2 * np.pi * 0.005))


def test_snr_bookkeeping():
    assert snr_to_n0(10.0) == pytest.approx(0.1)
    assert esn0_to_ebn0(0.0) == pytest.approx(10 * np.log10(3))


def _frame(mod="bpsk"):
    cfg = CodeConfig(8, interleaver_seed=1)
    layout = layout_for(cfg, mod, 4)
    rng = np.random.default_rng(2)
    return build_frame_pair(rng.integers(0, 2, 8), rng.integers(0, 2, 8), cfg, layout, mod)


def test_transmit_single_user():
    fp = _frame()
    L = fp.layout.total_len
    tr = ChannelTrace(np.ones(L), np.zeros(L), np.zeros(L, complex), 0.0)
    np.testing.assert_array_equal(transmit(fp, tr), fp.symbols_A)


def test_transmit_superposition_alphabet():
    fp = _frame()
    L = fp.layout.total_len
    y = transmit(fp, ChannelTrace(np.ones(L), np.ones(L), np.zeros(L, complex), 0.0))
    assert set(np.round(y.real).astype(int)) <= {-2, 0, 2}


def test_transmit_identity():
    fp = _frame("qpsk")
    tr = gen_trace(GaussMarkovConfig(0.9, fp.layout.total_len), 0.3, np.random.default_rng(4))
    y = transmit(fp, tr)
    np.testing.assert_allclose(y - tr.h_A * fp.symbols_A - tr.h_B * fp.symbols_B, tr.noise, atol=1e-15)


def test_transmit_length_mismatch():
    fp = _frame()
    tr = gen_trace(GaussMarkovConfig(0.9, 5), 0.1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        transmit(fp, tr)


def test_noise_level_rescaling_keeps_pairing():
    tr = gen_trace(GaussMarkovConfig(0.9, 100), 1.0, np.random.default_rng(0))
    tr2 = tr.with_noise_level(0.01)
    np.testing.assert_allclose(tr2.noise, 0.1 * tr.noise)
    np.testing.assert_array_equal(tr2.h_A, tr.h_A)
