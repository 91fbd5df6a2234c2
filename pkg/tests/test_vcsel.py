import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pam4link.errors import CalibrationError
from pam4link.fiberlink import predict_notch
from pam4link.sigkit import Waveform
from pam4link.vcsel import (
    VcselParams,
    bandwidth_3db,
    calibrate_bandwidth,
    calibrate_chirp,
    calibrate_kappa,
    intensity,
    link_response,
    modulate,
    multitone_probe,
    simulated_null,
    small_signal_s21,
    static_liv,
    tone_ratio,
)

P = VcselParams()
FS = 320e9
FITTED = VcselParams(alpha_h=4.353, kappa=1.0036e13)


def _drive(seed=0, n=4096, vpp=0.35):
    x = np.random.default_rng(seed).uniform(-1, 1, n)
    return Waveform(vpp * x, FS)


def test_static_li_landmarks():
    assert static_liv(P, 1.0e-3)[0] == 0.0
    p8, _ = static_liv(P, 8e-3)
    assert p8 == pytest.approx(P.p_max)
    dp = (static_liv(P, 8e-3 + 1e-7)[0] - static_liv(P, 8e-3 - 1e-7)[0]) / 2e-7
    assert abs(dp) < 1e-6 * P.p_max / 1e-3
    i = np.linspace(0, 15e-3, 301)
    _, v = static_liv(P, i)
    assert np.all(np.diff(v) > 0)
    with pytest.raises(ValueError):
        static_liv(P, -1e-3)


def test_small_signal_bandwidth_landmarks():
    assert bandwidth_3db(P, 7e-3) == pytest.approx(20e9, abs=0.5e9)
    assert abs(small_signal_s21(P).gains[0]) == 1.0
    assert bandwidth_3db(P, 3e-3) < bandwidth_3db(P, 7e-3)
    with pytest.raises(ValueError):
        small_signal_s21(P, bias=1e-3)


def test_calibrate_bandwidth_hits_target():
    q = calibrate_bandwidth(VcselParams(f_r=10e9), 20e9, 7e-3)
    assert bandwidth_3db(q, 7e-3) == pytest.approx(20e9, rel=1e-4)


def test_no_chirp_gives_real_field():
    q = VcselParams(alpha_h=0.0, kappa=0.0)
    fld = modulate(q, _drive())
    assert np.all(fld.samples.imag == 0)
    np.testing.assert_allclose(fld.samples.real, np.sqrt(intensity(q, _drive())), rtol=1e-12)


def test_cw_adiabatic_chirp_is_frequency_offset():
    q = VcselParams(alpha_h=3.0, kappa=2e13)
    fld = modulate(q, Waveform(np.zeros(2048), FS))
    p0 = static_liv(q, q.bias)[0]
    phase = np.unwrap(np.angle(fld.samples))
    slope = np.polyfit(np.arange(2048) / FS, phase, 1)[0]
    assert slope == pytest.approx(0.5 * q.alpha_h * q.kappa * p0, rel=1e-9)
    assert np.ptp(np.abs(fld.samples)) < 1e-12
    assert np.ptp(np.angle(modulate(q, Waveform(np.zeros(2048), FS), remove_offset=True).samples)) < 1e-12


def test_modulate_deterministic_and_power_consistent():
    d = _drive(3)
    a, b = modulate(FITTED, d), modulate(FITTED, d)
    np.testing.assert_array_equal(a.samples, b.samples)
    p = intensity(FITTED, d)
    assert np.all(p >= 0)
    assert abs(np.sum(a.power) / np.sum(p) - 1) < 1e-9


def test_small_signal_consistency_with_s21():
    rms = 10 ** (-40 / 20) * 0.35  # -40 dB below the DAC full scale
    probe, bins = multitone_probe(250e6, 30e9, FS, rms, f_min=0.5e9)
    p = intensity(P, probe)
    h = tone_ratio(probe.samples, p, bins)
    f = bins / probe.duration
    ref = small_signal_s21(P, freqs=f).gains
    err = 20 * np.log10(np.abs(h / h[0])) - 20 * np.log10(np.abs(ref / ref[0]))
    assert np.max(np.abs(err)) < 0.3


def test_unchirped_link_null_at_closed_form():
    for alpha in (0.0, 12.0):
        q = VcselParams(alpha_h=alpha, kappa=0.0)
        f, _ = simulated_null(q, 17.1)
        assert f == pytest.approx(predict_notch(alpha, 17.1), rel=0.02)


def test_fitted_chirp_null_landmarks():
    f, depth = simulated_null(FITTED, 17.1, f_max=40e9)
    assert f == pytest.approx(23e9, abs=0.46e9)
    assert -35 <= depth <= -20


def test_null_decreases_with_dispersion():
    nulls = [simulated_null(FITTED, d, f_max=60e9)[0] for d in (8.0, 12.0, 17.1, 25.0, 34.2)]
    assert all(b < a for a, b in zip(nulls, nulls[1:]))


def test_calibrate_chirp_reproduces_null_position_and_depth():
    q = calibrate_chirp(VcselParams(), 23e9, -25.0, 17.1)
    f, depth = simulated_null(q, 17.1, f_max=40e9)
    assert f == pytest.approx(23e9, abs=0.46e9)
    assert depth == pytest.approx(-25.0, abs=0.5)
    assert q.kappa > 0


def test_calibrate_kappa_insensitive_without_alpha():
    with pytest.raises(CalibrationError, match="insensitive"):
        calibrate_kappa(VcselParams(alpha_h=0.0), 23e9, 17.1)


def test_calibrate_kappa_reachable_target():
    # adiabatic chirp moves the transient-chirp null downward
    q = VcselParams(alpha_h=12.0)
    target = 0.97 * predict_notch(12.0, 17.1)
    k = calibrate_kappa(q, target, 17.1)
    f, _ = simulated_null(VcselParams(alpha_h=12.0, kappa=k), 17.1)
    assert k > 0
    assert f == pytest.approx(target, rel=0.02)


def test_calibrate_kappa_reports_bracket_when_unreachable():
    with pytest.raises(CalibrationError, match="at kappa=0"):
        calibrate_kappa(VcselParams(alpha_h=12.0), 23e9, 17.1)


def test_link_response_normalized():
    h = link_response(FITTED, 0.0, f_max=20e9, spacing=500e6)
    assert abs(h.gains[0]) == pytest.approx(1.0)


@given(st.integers(0, 10_000), st.floats(0.05, 1.5))
def test_intensity_non_negative(seed, vpp):
    assert np.all(intensity(P, _drive(seed, 512, vpp)) >= 0)
