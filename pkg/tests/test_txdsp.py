import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pam4link.sigkit import FrequencyResponse, Waveform, apply_frequency_response
from pam4link.txdsp import (
    PRBS15_PERIOD,
    TxConfig,
    apply_preeq_and_dac,
    demap_pam4,
    design_preequalizer,
    from_csv,
    map_pam4,
    prbs15,
    pulse_shape,
    quantize,
    to_csv,
)


def lfsr_oracle(n):
    # a[k] = a[k-14] ^ a[k-15], register preloaded with ones
    a = [1] * 15
    while len(a) < 15 + n:
        a.append(a[-14] ^ a[-15])
    return np.array(a[15:], dtype=np.uint8)


def test_prbs_matches_independent_lfsr():
    np.testing.assert_array_equal(prbs15(0x7FFF, 30), lfsr_oracle(30))
    np.testing.assert_array_equal(prbs15(0x7FFF, 500), lfsr_oracle(500))


@pytest.mark.parametrize("seed", [1, 0x1234, 0x7FFF])
def test_prbs_period_and_balance(seed):
    b = prbs15(seed, 2 * PRBS15_PERIOD)
    np.testing.assert_array_equal(b[:PRBS15_PERIOD], b[PRBS15_PERIOD:])
    one = prbs15(seed)
    assert one.sum() == 16384 and one.size - one.sum() == 16383


def test_prbs_cyclic_autocorrelation():
    s = 1.0 - 2.0 * prbs15()
    c = np.rint(np.fft.irfft(np.abs(np.fft.rfft(s)) ** 2, s.size)).astype(int)
    assert c[0] == PRBS15_PERIOD
    assert np.all(c[1:] == -1)


def test_prbs_rejects_zero_seed():
    with pytest.raises(ValueError):
        prbs15(0)


def test_gray_map_definition_and_adjacency():
    np.testing.assert_array_equal(map_pam4([0, 0, 0, 1, 1, 1, 1, 0]), [-3, -1, 1, 3])
    labels = {lv: tuple(demap_pam4([lv])) for lv in (-3, -1, 1, 3)}
    for a, b in itertools.combinations((-3, -1, 1, 3), 2):
        dist = sum(x != y for x, y in zip(labels[a], labels[b]))
        if abs(a - b) == 2:
            assert dist == 1
    for pair in itertools.product((0, 1), repeat=2):
        np.testing.assert_array_equal(demap_pam4(map_pam4(pair)), pair)


def test_raised_cosine_single_pulse_is_nyquist():
    cfg = TxConfig(sps=4)
    a = np.zeros(256)
    a[100] = 1.0
    y = pulse_shape(a, cfg).samples[:: cfg.sps]
    assert y[100] == pytest.approx(1.0, abs=1e-6)
    assert np.max(np.abs(np.delete(y, 100))) < 1e-6


def test_raised_cosine_band_edge_and_superposition():
    cfg = TxConfig(baud=50e9, sps=4)
    sym = map_pam4(prbs15(n=4096))
    w = pulse_shape(sym, cfg)
    np.testing.assert_allclose(w.samples[:: cfg.sps], sym, atol=1e-6)
    spec = np.abs(np.fft.rfft(w.samples))
    f = np.fft.rfftfreq(len(w), 1 / w.sample_rate)
    out = spec[f > 28.75e9 + 1e6]
    assert 20 * np.log10(out.max() / spec.max()) < -60


def _notch_channel(depth_db, f0=23e9):
    f = np.linspace(0, 40e9, 401)
    # unit DC gain, a real zero pair at f0 filled to exactly depth_db, linear phase
    floor = 10 ** (depth_db / 20)
    g = (np.abs(1 - (f / f0) ** 2) * (1 - floor) + floor) * np.exp(-2j * np.pi * f * 20e-12)
    return FrequencyResponse(f, g)


def test_preequalizer_identity_is_flat():
    f = np.linspace(0, 40e9, 401)
    p = design_preequalizer(FrequencyResponse(f, np.ones(f.size)), 26e9)
    band = p.freqs <= 26e9
    np.testing.assert_allclose(np.abs(p.gains[band]), 1.0, atol=1e-12)


def test_preequalizer_boosts_notch_by_its_depth():
    h = _notch_channel(-30)
    p = design_preequalizer(h, 26e9)
    boost = 20 * np.log10(np.abs(p.at([23e9])[0]) / np.abs(p.at([0.0])[0]))
    mag_h = 20 * np.log10(np.abs(h.at([23e9])[0]))
    assert boost == pytest.approx(-mag_h, abs=0.05)
    assert boost == pytest.approx(30, abs=0.5)


def test_preequalized_composite_is_flat_in_band():
    h = _notch_channel(-30)
    p = design_preequalizer(h, 26e9, floor_db=-35)
    f = h.freqs[h.freqs <= 26e9]
    comp = 20 * np.log10(np.abs(h.at(f) * p.at(f)))
    assert np.ptp(comp) <= 1.0  # within +/-0.5 dB of a constant


def test_deeper_notch_lowers_dc_after_full_scale():
    cfg = TxConfig()
    sym = map_pam4(prbs15(n=2 * 8192))
    shaped = pulse_shape(sym, cfg)
    n_dac = int(round(len(sym) * cfg.dac_rate / cfg.baud))
    from pam4link.sigkit import resample_to_length

    x = resample_to_length(shaped, n_dac)
    dc = {}
    for depth in (-30, -22):
        p = design_preequalizer(_notch_channel(depth), 26e9)
        y = apply_frequency_response(x, p)
        dc[depth] = abs(p.gains[0]) * cfg.full_scale / np.max(np.abs(y.samples))
    assert dc[-30] < dc[-22]


def test_quantizer_sqnr():
    n = 1 << 16
    x = np.sin(2 * np.pi * 1031 * np.arange(n) / n)
    q = quantize(x, 8, 1.0)
    sqnr = 10 * np.log10(np.mean(x**2) / np.mean((q - x) ** 2))
    assert sqnr == pytest.approx(6.02 * 8 + 1.76, abs=1.0)


def test_dac_output_levels():
    cfg = TxConfig()
    x = Waveform(np.sin(np.arange(920) * 0.3), cfg.dac_rate)
    y = apply_preeq_and_dac(x, None, cfg, bandlimit=False)
    assert np.max(np.abs(y.samples)) == pytest.approx(0.350, abs=1e-12)
    z = apply_preeq_and_dac(x.with_samples(np.zeros(920)), None, cfg)
    assert np.all(z.samples == 0)


def test_csv_round_trip(tmp_path):
    w = Waveform(np.random.default_rng(0).standard_normal(50), 92e9)
    to_csv(w, tmp_path / "w.csv")
    r = from_csv(tmp_path / "w.csv")
    assert r.sample_rate == w.sample_rate
    np.testing.assert_array_equal(r.samples, w.samples)


@given(st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=64), st.integers(1, 12))
def test_quantizer_symmetric_and_monotone(values, bits):
    x = np.sort(np.asarray(values)) + 0.0  # drop signed zeros for the ordering check
    q = quantize(x, bits, 1.0)
    np.testing.assert_array_equal(quantize(-x, bits, 1.0), -q)
    assert np.all(np.diff(q) >= 0)
    assert np.all(np.abs(q) <= 1.0)
